"""Deterministic stress harness for graph datasets and external model outputs.

Five stress axes (corruption, OOD shifts, class imbalance, fairness,
interpretation fidelity) over a shared graph data model, with counter-based
randomness so every operator output is a pure function of its inputs and a
master seed.
"""

__version__ = "0.1.0"
