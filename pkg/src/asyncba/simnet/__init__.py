"""Adversarial discrete-event simulation of the protocol stack."""

from .adversaries import ADVERSARIES, AdversarySpec
from .network import PROTOCOLS, Network
from .report import TrialReport
from .trial import ENGINES, run_trial

__all__ = ["ADVERSARIES", "AdversarySpec", "ENGINES", "Network", "PROTOCOLS", "TrialReport", "run_trial"]
