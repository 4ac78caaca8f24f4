"""Experiment orchestration, statistics, persistence and the command line."""
