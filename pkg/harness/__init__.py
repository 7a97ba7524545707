"""Experiment harness for the PSRV laboratory: scenarios, sweeps, thresholds and empirical runs."""
