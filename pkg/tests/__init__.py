"""PSRV laboratory test suite."""
