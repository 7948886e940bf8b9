"""Acceptance criteria 1-9. Each test records a PASS/FAIL line shown in the terminal summary."""

import itertools
import time
from pathlib import Path

import numpy as np

from oracles import displacement_identity_deviation, thermal_correlator_quadrature, z_w_closed_form
from pathwit.bounds import (
    analytic_bound_from_counts,
    bipartite_bound_from_counts,
    margin,
    margin_w_analytic,
    qubit_ppt_bound_sdp,
    qudit_ppt_bound_sdp,
    w_statistics_diagonal,
)
from pathwit.config import ExperimentConfig, Grid, load_counts
from pathwit.experiments import run_n_scaling, run_verdict
from pathwit.fock import (
    DensityMatrix,
    FockSpace,
    MultiModeOperator,
    coherent_ket,
    dephase_total_number,
    expectation,
    partial_transpose,
    thermal_state,
)
from pathwit.sdp import PsdConstraint, SdpProblem, diagonal_constraint, solve, trace_constraint
from pathwit.source import (
    SourceParams,
    apply_splitter,
    click_stats_from_state,
    click_table_from_state,
    heralded_correlator,
    heralded_state,
    loss_channel,
    model_click_stats,
    p00_alpha,
    thermal_correlator,
    tripartite_prediction,
)
from pathwit.witness import WitnessSpec, build_witness, correlator, w_state, witness_from_counts, z_w_analytic

DATA = Path(__file__).parent / "data"


def test_criterion_1_closed_form_consistency(acceptance):
    start = time.perf_counter()
    worst = 0.0
    for n, alpha in itertools.product((2, 3), (0.3, 0.7, 0.83, 1.0)):
        dims = (4,) * n
        value = expectation(build_witness(WitnessSpec(n, alpha), dims), w_state(n, dims))
        worst = max(worst, abs(value - z_w_closed_form(n, alpha)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 1.0
    acceptance(1, ok, f"max |Fock - closed form| = {worst:.2e} (tol 1e-8), {elapsed:.2f} s (limit 1 s)")
    assert ok


def test_criterion_2_margin_by_optimization(acceptance):
    start = time.perf_counter()
    worst = 0.0
    for n, alpha in itertools.product((2, 3), (0.7, 0.83)):
        bound = qubit_ppt_bound_sdp(n, alpha, "genuine", diagonal=w_statistics_diagonal(n))
        expected = 2 ** (n + 3) * (n - 1) / n * alpha**2 * np.exp(-2 * alpha**2)
        worst = max(worst, abs(z_w_analytic(n, alpha) - bound.value - expected))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-5 and elapsed < 60
    acceptance(2, ok, f"max |SDP margin - closed form| = {worst:.2e} (tol 1e-5), {elapsed:.2f} s (limit 60 s)")
    assert ok


def test_criterion_3_positivity_scaling(acceptance):
    start = time.perf_counter()
    a = 1 / np.sqrt(2)
    closed = {n: margin_w_analytic(n, 1, a) for n in range(2, 9)}
    table = run_n_scaling(ExperimentConfig("n-scaling", n_min=2, n_max=8, sdp_max_modes=4))
    sdp_dev = max(abs(s - m) for s, m in zip(table.column("sdp_margin")[:3], table.column("margin")[:3]))
    sdp_at_a = []
    for n in (2, 3, 4):
        b = qubit_ppt_bound_sdp(n, a, "genuine", diagonal=w_statistics_diagonal(n))
        sdp_at_a.append(abs(z_w_analytic(n, a) - b.value - closed[n]))
    elapsed = time.perf_counter() - start
    ok = min(closed.values()) > 0 and sdp_dev < 1e-5 and max(sdp_at_a) < 1e-5 and elapsed < 300
    acceptance(3, ok, f"min margin over N=2..8 = {min(closed.values()):.4f} > 0, SDP agreement N<=4 "
                      f"{max(sdp_dev, *sdp_at_a):.1e}, {elapsed:.2f} s (limit 300 s)")
    assert ok


def test_criterion_4_tripartite_ideal(acceptance):
    start = time.perf_counter()
    best, best_a = -np.inf, None
    for a in Grid(0.70, 0.90, 0.005).points():
        stats = click_stats_from_state(w_state(3), float(a))
        spec = WitnessSpec(3, float(a), "tripartite")
        m = margin(witness_from_counts(stats, spec), spec, analytic_bound_from_counts(stats, float(a)))
        if m > best:
            best, best_a = m, float(a)
    elapsed = time.perf_counter() - start
    ok = abs(best - 7.63) <= 0.3 and elapsed < 10
    acceptance(4, ok, f"max margin {best:.4f} at alpha {best_a:.3f} (target 7.63 +- 0.3), {elapsed:.2f} s")
    assert ok


def test_criterion_5_tripartite_lossy(acceptance):
    start = time.perf_counter()
    pred = tripartite_prediction(SourceParams(alpha=0.83), 0.19)
    elapsed = time.perf_counter() - start
    ok = abs(pred.margin - 0.99) <= 0.15 and elapsed < 60
    acceptance(5, ok, f"lossy margin {pred.margin:.4f} (target 0.99 +- 0.15), {elapsed:.2f} s (limit 60 s)")
    assert ok


def test_criterion_6_bipartite_verdict(acceptance):
    v = run_verdict(load_counts(DATA / "bipartite_experiment.counts"))
    ok = (abs(v.bound - (-0.315)) <= 0.03 and abs(v.margin - 0.313) <= 0.03
          and v.verdict == "entangled-in-qubit-subspace")
    acceptance(6, ok, f"witness {v.witness_value:.4f}, bound {v.bound:.4f} (target -0.315), "
                      f"margin {v.margin:.4f} (target 0.313), verdict {v.verdict}")
    assert ok


def _split(single, dim, eta, transmittivity):
    m = np.kron(np.diag([1.0] + [0.0] * (dim - 1)), single)
    rho = DensityMatrix(FockSpace((dim, dim)), m)
    return apply_splitter(loss_channel(rho, eta, 0), 0, 1, transmittivity)


def test_criterion_7_model_vs_brute_force(acceptance):
    start = time.perf_counter()
    dim = 24
    worst = 0.0
    for nbar, eta, alpha in itertools.product((0.05, 0.2, 0.5), (0.3, 0.6, 1.0), (0.3, 0.6, 0.83)):
        p = SourceParams(t_g=float(np.sqrt(nbar / (1 + nbar))), eta_h=0.5, eta_total=eta,
                         transmittivity=0.4, alpha=alpha)
        thermal = click_table_from_state(_split(thermal_state(nbar, dim).matrix, dim, eta, 0.4), (0, 1), alpha)
        heralded = click_table_from_state(_split(heralded_state(p, dim).matrix, dim, eta, 0.4), (0, 1), alpha)
        worst = max(worst,
                    abs(p00_alpha(p, nbar) - thermal["00"]),
                    abs(thermal_correlator(p, nbar) - correlator(thermal, [0, 1])),
                    abs(heralded_correlator(p) - correlator(heralded, [0, 1])))
    quad = abs(thermal_correlator(SourceParams(eta_total=0.3, alpha=0.83), 1.0)
               - thermal_correlator_quadrature(1.0, 0.3, 0.5, 0.83))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-7 and quad < 1e-7 and elapsed < 120
    acceptance(7, ok, f"27-point grid max deviation {worst:.2e} (tol 1e-7), quadrature check {quad:.1e}, "
                      f"{elapsed:.2f} s (limit 120 s)")
    assert ok


def test_criterion_8_displacement_through_splitter(acceptance):
    worst = max(displacement_identity_deviation(a, e) for a, e in itertools.product((0.3, 0.83), (0.25, 0.5, 0.9)))
    ok = worst < 1e-8
    acceptance(8, ok, f"max deviation {worst:.2e} on the 20-level block (tol 1e-8)")
    assert ok


def _random_density(rng, dims):
    n = int(np.prod(dims))
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = g @ g.conj().T
    return DensityMatrix(FockSpace(dims), m / np.trace(m))


def test_criterion_9_property_suites(acceptance):
    rng = np.random.default_rng(2024)
    checks = {}

    pt_err = dephase_err = 0.0
    for dims in [(2, 3), (3, 3), (2, 2, 3)]:
        rho = _random_density(rng, dims)
        for k in range(len(dims)):
            twice = partial_transpose(partial_transpose(rho, [k]), [k])
            pt_err = max(pt_err, np.max(np.abs(twice.matrix - rho.matrix)))
        op = MultiModeOperator(rho.space, rho.matrix)
        once = dephase_total_number(op)
        dephase_err = max(dephase_err, np.max(np.abs(dephase_total_number(once).matrix - once.matrix)))
    checks["PT involution"] = pt_err < 1e-13
    checks["dephasing idempotence"] = dephase_err == 0.0

    def pt(x):
        return x.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)

    z2 = build_witness(WitnessSpec(2, 0.83), [2, 2]).matrix
    cons = [PsdConstraint("rho"), trace_constraint("rho", 4, 1.0), PsdConstraint("rho", pt)]
    cons += [diagonal_constraint("rho", 4, i, v) for i, v in enumerate([0, 0.5, 0.5, 0])]
    optima = [solve(SdpProblem([("rho", 4)], {"rho": z2}, cons[:k])).optimum for k in (2, 3, 4, len(cons))]
    checks["SDP constraint monotonicity"] = all(a >= b - 1e-6 for a, b in zip(optima, optima[1:]))

    sandwich = []
    for stats in [model_click_stats(SourceParams(eta_total=0.31, dark_count=1e-2), pc=1e-4),
                  model_click_stats(SourceParams(eta_total=1.0))]:
        sandwich.append(bipartite_bound_from_counts(stats, 0.83).value - qudit_ppt_bound_sdp(stats, 0.83).value)
    checks["analytic >= SDP sandwich"] = min(sandwich) >= -1e-5

    worst_sep = -np.inf
    dim = 10
    states = [np.kron(thermal_state(0.05, dim).matrix, thermal_state(0.2, dim).matrix)]
    for b1, b2 in [(0.3, 0.1), (0.5, -0.5j), (0.9, 0.2)]:
        k = np.kron(coherent_ket(b2, dim), coherent_ket(b1, dim))
        states.append(np.outer(k, k.conj()) / np.vdot(k, k).real)
    for alpha in (0.5, 0.83, 1.0):
        spec = WitnessSpec(2, alpha, "bipartite")
        for m in states:
            stats = click_stats_from_state(DensityMatrix(FockSpace((dim, dim)), m / np.trace(m).real), alpha)
            worst_sep = max(worst_sep, witness_from_counts(stats, spec) - bipartite_bound_from_counts(stats, alpha).value)
    checks["separable non-violation"] = worst_sep <= 1e-9

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    acceptance(9, ok, f"{len(checks) - len(failed)}/{len(checks)} property checks hold"
                      + (f"; failing: {', '.join(failed)}" if failed else "")
                      + f" (worst separable margin {worst_sep:.4f}, min sandwich gap {min(sandwich):.2e})")
    assert ok
