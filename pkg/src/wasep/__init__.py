"""Simulation and Gaussian fluctuation theory of the weakly asymmetric exclusion process."""

__version__ = "0.1.0"
