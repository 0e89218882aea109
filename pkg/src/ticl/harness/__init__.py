"""Experiment harness: configs, backends, runner, sweeps, and reports."""
