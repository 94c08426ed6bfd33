"""Experiment campaigns, sampling checks, complexity fits and the command line."""
