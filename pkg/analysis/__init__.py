"""Observables and cluster statistics over simulated states and snapshots."""
