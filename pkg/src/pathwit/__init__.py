"""Displaced-detection witnesses for single-photon path entanglement.

Submodules: :mod:`~pathwit.fock` (truncated Fock-space algebra),
:mod:`~pathwit.witness` (observables, witness operators, click statistics),
:mod:`~pathwit.sdp` (dense SDP solver), :mod:`~pathwit.bounds` (PPT
thresholds), :mod:`~pathwit.source` (heralded-source model) and
:mod:`~pathwit.experiments` / :mod:`~pathwit.cli` (sweeps and verdicts).
"""

from .bounds import (
    BoundResult,
    bipartite_bound_from_counts,
    margin,
    margin_w_analytic,
    pc_from_photon_statistics,
    qubit_ppt_bound_sdp,
    qudit_ppt_bound_sdp,
    tripartite_bound_from_counts,
    w_statistics_diagonal,
    z_alg,
)
from .errors import PathWitError
from .fock import DensityMatrix, FockSpace, MultiModeOperator
from .sdp import SdpProblem, SdpSolution, solve, verify
from .source import SourceParams, bipartite_prediction, tripartite_prediction
from .witness import ClickStats, MeasurementSetting, WitnessSpec, build_witness, w_state, witness_from_counts, z_w_analytic

__version__ = "0.1.0"
