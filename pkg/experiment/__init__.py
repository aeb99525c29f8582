"""Experiment orchestration: runs, sweeps, sampling and file formats."""
