"""Command-line harness: sweeps, table reproduction, oracles, calibration."""
