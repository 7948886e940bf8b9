"""Numeric tolerances shared by the library and its tests."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    psd_slack: float = -1e-10
    trace_slack: float = 1e-12
    imag_residue: float = 1e-10
    probability_sum: float = 1e-9
    truncation_tail: float = 1e-10


TOL = Tolerances()
