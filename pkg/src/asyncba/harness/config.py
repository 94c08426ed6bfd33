"""Experiment configuration and input assignment rules."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..crypto_sim import MASK64
from ..messages import BOT
from ..params import Parameters, derive_params
from ..simnet.adversaries import ADVERSARIES, AdversarySpec
from ..simnet.network import PROTOCOLS
from ..simnet.trial import ENGINES

CAMPAIGN_PROTOCOLS = PROTOCOLS + ("sampling_only",)
INPUT_RULES = ("all-0", "all-1", "all-bot", "split", "adversarial")

_INPUT_SALT = 0x1A9E7


class ConfigError(ValueError):
    """An experiment configuration that cannot be run."""


@dataclass
class ExperimentConfig:
    protocol: str
    n: int
    epsilon: float = 0.2
    d: float = 0.05
    full_participation: bool = False
    adversary: str = "uniform_random"
    adversary_params: dict = field(default_factory=dict)
    trials: int = 1
    base_seed: int = 0
    inputs: str = "all-1"
    split_value: int = 1
    engine: str = "batch"
    committees: int = 1000
    random_corruption: bool = False
    out: Optional[str] = None
    trace_dir: Optional[str] = None

    def params(self) -> Parameters:
        return derive_params(self.n, self.epsilon, self.d, self.full_participation)

    def adversary_spec(self) -> AdversarySpec:
        return AdversarySpec(self.adversary, **self.adversary_params)

    def validate(self) -> Parameters:
        """Check everything that can be checked without running a trial."""
        if self.protocol not in CAMPAIGN_PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}; choose from {', '.join(CAMPAIGN_PROTOCOLS)}")
        if self.trials < 0:
            raise ConfigError(f"trials must be non-negative, got {self.trials}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"unknown adversary {self.adversary!r}; choose from {', '.join(ADVERSARIES)}")
        if self.inputs not in INPUT_RULES:
            raise ConfigError(f"unknown input rule {self.inputs!r}; choose from {', '.join(INPUT_RULES)}")
        if self.split_value not in (0, 1):
            raise ConfigError("split_value must be 0 or 1")
        if self.inputs == "all-bot" and self.protocol != "approver":
            raise ConfigError("bot inputs only make sense for the approver")
        if self.trace_dir is not None and self.engine != "event":
            raise ConfigError("traces are written by the event engine only")
        try:
            params = self.params()
            self.adversary_spec()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.protocol == "sampling_only" and self.committees < 1:
            raise ConfigError("sampling_only needs at least one committee")
        return params

    def to_dict(self) -> dict:
        return asdict(self)


def trial_inputs(config: ExperimentConfig, n: int, seed: int) -> Optional[np.ndarray]:
    """Inputs of one trial under the configured rule.

    ``split`` gives even pids ``split_value`` and odd pids the other bit (for
    the approver: bot).  ``adversarial`` lets the adversary's seed pick each
    input, again from two values so the approver sees at most two.
    """
    if config.protocol not in ("agreement", "approver"):
        return None
    rule = config.inputs
    other = BOT if config.protocol == "approver" else 1 - config.split_value
    if rule.startswith("all-"):
        v = {"0": 0, "1": 1, "bot": BOT}[rule[4:]]
        return np.full(n, v, dtype=np.int8)
    if rule == "split":
        return np.where(np.arange(n) % 2 == 0, config.split_value, other).astype(np.int8)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & MASK64, _INPUT_SALT])))
    pick = rng.integers(0, 2, size=n).astype(bool)
    return np.where(pick, config.split_value, other).astype(np.int8)
