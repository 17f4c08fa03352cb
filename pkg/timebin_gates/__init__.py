"""Deterministic unitary gates on time-bin qudits: synthesis, netlists and simulation."""

from .circuit_simulator import build_gate, measure_in_basis, simulate
from .reck_synthesis import decompose, reconstruct

__all__ = ["build_gate", "decompose", "measure_in_basis", "reconstruct", "simulate"]
