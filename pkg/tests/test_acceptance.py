"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``C<n> PASS`` or ``C<n> FAIL`` line with the measured
numbers, and then asserts.
"""
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from norminflation.approx import error_order, fit_power_law
from norminflation.inflation import ExperimentSpec, run_experiment
from norminflation.modes import ModeField
from norminflation.resonance import (
    ResonantTuple,
    box_points,
    cubic_rows,
    is_resonant,
    pad_tuple,
    quintic_tuple,
    resonant_rows,
)
from norminflation.spectral import (
    SolverConfig,
    default_grid_size,
    duhamel_oscillatory,
    free_propagate,
    grid_to_modes,
    modes_to_grid,
    physical_mode,
)
from norminflation.transport import (
    build_system,
    corrector_peak_time,
    explicit_cubic_1d,
    explicit_renormalized_1d,
    integrate_corrector,
    integrate_transport,
)

TWO = ModeField.unit([1, 2])
SQUARE = [(1, 0), (0, 1), (1, 1)]


@pytest.fixture
def report(capsys):
    def emit(name, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{label} [{'ok' if passed else 'FAIL'}]" for label, passed in checks)
        with capsys.disabled():
            print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_c1_resonance_oracle_equivalence(report):
    start = time.perf_counter()
    mismatches = []
    for j in range(-4, 5):
        if not np.array_equal(resonant_rows(j, 1, 8), cubic_rows(j, 8)):
            mismatches.append((j,))
    for d in (2, 3):
        for j in itertools.product(range(-2, 3), repeat=d):
            if not np.array_equal(resonant_rows(j, 1, 4), cubic_rows(j, 4)):
                mismatches.append(j)
    elapsed = time.perf_counter() - start
    report("C1", [(f"mismatched targets {mismatches}", not mismatches), (f"runtime {elapsed:.1f}s < 30s", elapsed < 30)])


def test_c2_quintic_and_padding(report):
    bad = []
    for p, q in itertools.product(range(-5, 6), repeat=2):
        if p == 0 or q == 0 or abs(p) == abs(q):
            continue
        t = quintic_tuple(p, q)
        if not (is_resonant(t.entries, 0) and t.target == (0,) and all(e[0] != 0 for e in t.entries)):
            bad.append((p, q))
    rng = np.random.default_rng(20240607)
    triples = []
    while len(triples) < 20:
        k, ell, m = (tuple(int(c) for c in rng.integers(-4, 5, size=2)) for _ in range(3))
        j = tuple(a - b + c for a, b, c in zip(k, ell, m))
        if is_resonant([k, ell, m], j):
            triples.append(ResonantTuple((k, ell, m), j))
    pad_bad = [
        (t, sigma)
        for t in triples
        for sigma in (2, 3)
        for padded in pad_tuple(t, sigma)
        if not is_resonant(padded.entries, padded.target)
    ]
    report("C2", [(f"quintic failures {bad}", not bad), (f"padding failures {len(pad_bad)}", not pad_bad)])


def test_c3_transport_regression(report):
    checks = []
    for renorm, exact in ((False, explicit_cubic_1d), (True, explicit_renormalized_1d)):
        sys = build_system([1, 2], 1, 1, renormalized=renorm)
        traj = integrate_transport(TWO, sys, 1.0, 1e-3)
        err = max(abs(traj.at(t)[j] - exact(TWO, t)[j]) for t in traj.times for j in (1, 2))
        checks.append((f"{'renormalized' if renorm else 'nls'} max error {err:.2e} <= 1e-8", err <= 1e-8))

    # at dt = 1e-3 the error is at rounding level, so the order is measured at coarser steps
    alpha = ModeField(1, {1: 1.0, 2: 0.5 + 0.5j})
    sys = build_system([1, 2], 1, 1)

    def err(dt):
        traj = integrate_transport(alpha, sys, 1.0, dt)
        return max(abs(traj.at(t)[j] - explicit_cubic_1d(alpha, t)[j]) for t in traj.times for j in (1, 2))

    ratio = err(0.1) / err(0.05)
    checks.append((f"rk4 ratio {ratio:.2f} in [12, 20]", 12 <= ratio <= 20))
    report("C3", checks)


def b0_formula(t, eps):
    return -((1 - 3 * eps) / (1 + eps)) * np.exp(-4j * t) * (np.exp(1j * t + 1j * t / eps) - 1)


def test_c4_corrector_regression(report):
    checks = []
    for eps in (1 / 8, 1 / 16, 1 / 32):
        tag = f"eps=1/{round(1 / eps)}"
        sys = build_system([1, 2], 1, 1)
        traj = integrate_transport(TWO, sys, 2 * eps, 2 * eps / 200)
        corr = integrate_corrector(traj, sys, eps, eps / 200)
        t = corr.times
        e0 = np.max(np.abs(corr.series(0) - b0_formula(t, eps)))
        e12 = max(np.max(np.abs(corr.series(1))), np.max(np.abs(corr.series(2))))
        checks.append((f"{tag} b0 error {e0:.1e} <= 1e-6", e0 <= 1e-6))
        checks.append((f"{tag} max|b1|,|b2| {e12:.1e} <= 1e-9", e12 <= 1e-9))
        checks.append((f"{tag} support {[j[0] for j in corr.support]}", corr.support == ((0,), (3,))))

        rs = build_system([1, 2], 1, 1, renormalized=True)
        rtraj = integrate_transport(TWO, rs, 2 * eps, 2 * eps / 200)
        rcorr = integrate_corrector(rtraj, rs, eps, eps / 200)
        er = np.max(np.abs(np.abs(rcorr.series(0)) - 2 * np.abs(np.sin((1 + eps) * t / (2 * eps)))))
        checks.append((f"{tag} renormalized |b0| error {er:.1e} <= 1e-6", er <= 1e-6))

        for renorm, s_ in ((False, sys), (True, rs)):
            name = "renormalized" if renorm else "nls"
            tau = corrector_peak_time(eps, renorm)
            ttraj = integrate_transport(TWO, s_, tau, tau / 200)
            tcorr = integrate_corrector(ttraj, s_, eps, eps / 200, T=tau)
            mod = abs(tcorr.at(tau)[0])
            ratio = (tau / eps) / ((math.pi / 3) / (1 + eps))
            checks.append((f"{tag} {name} |b0(tau)|-1 = {mod - 1:.1e}", abs(mod - 1) <= 1e-8))
            checks.append((f"{tag} {name} tau ratio {ratio:.3f} in [0.9, 1.1]", 0.9 <= ratio <= 1.1))
    report("C4", checks)


def test_c5_propagator_identity(report):
    checks = []
    for eps in (1 / 4, 1 / 8):
        tag = f"eps=1/{round(1 / eps)}"
        for j in ((1,), (3,), (1, 2)):
            m = physical_mode(j, eps)
            M = default_grid_size([j], eps)
            g = modes_to_grid(ModeField.unit([m], len(j)), M)
            t = 0.37
            out = free_propagate(g, t, eps)
            want = np.exp(-1j * t * sum(c * c for c in j) / (2 * eps))
            coeffs = grid_to_modes(out, tol=1e-13)
            phase_err = abs(coeffs[m] - want)
            ok_support = coeffs.support == (m,)
            norm_err = abs(np.linalg.norm(out.values) - np.linalg.norm(g.values))
            group = np.max(np.abs(free_propagate(free_propagate(g, 0.2, eps), 0.17, eps).values - out.values))
            checks.append((f"{tag} j={j} phase {phase_err:.1e}", phase_err <= 1e-10 and ok_support))
            checks.append((f"{tag} j={j} norm {norm_err:.1e}", norm_err <= 1e-12 * max(1, np.linalg.norm(g.values))))
            checks.append((f"{tag} j={j} group {group:.1e}", group <= 1e-12))
    report("C5", checks)


def test_c6_oscillatory_bounds(report):
    checks = []
    eps_list = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    one = lambda s: np.ones_like(s)
    for gap in (1, 2, 5):
        worst_exact = 0.0
        sups = []
        for eps in eps_list:
            ts = np.linspace(0, 1, 1001)
            vals = []
            for t in ts:
                got = duhamel_oscillatory(one, (3,), 9 - gap, eps, t)
                want = 2 * eps / (1j * gap) * (np.exp(1j * gap * t / (2 * eps)) - 1)
                worst_exact = max(worst_exact, abs(got - want))
                vals.append(abs(got))
            sups.append(max(vals))
        slope, _ = fit_power_law(eps_list, sups)
        checks.append((f"gap {gap} quadrature error {worst_exact:.1e} <= 1e-8", worst_exact <= 1e-8))
        checks.append((f"gap {gap} sup slope {slope:.3f}", abs(slope - 1) <= 0.05))
    report("C6", checks)


def test_c7_convergence_orders(report):
    start = time.perf_counter()
    sys = build_system([1, 2], 1, 1)
    cfg = SolverConfig(eps=1 / 8)
    eps = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    first = error_order(TWO, sys, cfg, eps, "first", T=0.5)
    second = error_order(TWO, sys, cfg, eps, "second", T=0.5, complete=True)
    elapsed = time.perf_counter() - start
    report(
        "C7",
        [
            (f"first-order slope {first.slope:.3f} in [0.8, 1.2]", 0.8 <= first.slope <= 1.2),
            (f"second-order slope {second.slope:.3f} in [1.7, 2.3]", 1.7 <= second.slope <= 2.3),
            (f"runtime {elapsed:.0f}s < 300s", elapsed < 300),
        ],
    )


def test_c8_zero_mode_creation(report):
    checks = []
    alpha = ModeField.unit(SQUARE, 2)
    h = 1e-4
    for renorm in (False, True):
        name = "renormalized" if renorm else "nls"
        sys = build_system(SQUARE, 1, 2, renormalized=renorm)
        traj = integrate_transport(alpha, sys, 2 * h, h)
        a = [traj.at(k * h)[(0, 0)] for k in range(3)]
        deriv = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
        checks.append((f"{name} da0/dt(0) = {deriv:.6f}", abs(deriv + 2j) <= 1e-3))
    sys = build_system(SQUARE, 1, 2)
    a0 = abs(integrate_transport(alpha, sys, 0.1, 1e-3).at(0.1)[(0, 0)])
    checks.append((f"|a0(0.1)| = {a0:.4f} > 0.1", a0 > 0.1))
    report("C8", checks)


def increasing(xs):
    return all(a < b for a, b in zip(xs, xs[1:]))


def test_c9_inflation_power_laws(report):
    start = time.perf_counter()
    checks = []
    spec = ExperimentSpec("multiD-cubic", -0.5, (2, 3, 4, 5), p=2, beta=Fraction(1, 2))
    run = run_experiment(spec)
    recs = run.records
    eps = [r.eps for r in recs]
    checks.append((f"kappa {recs[0].kappa}, eps 1/{round(1 / eps[0])}..1/{round(1 / eps[-1])}",
                   recs[0].kappa == 4 and eps[0] == 1 / 16 and eps[-1] == 1 / 625))
    checks.append(("norm_in decreasing", increasing([-r.norm_in for r in recs])))
    checks.append(("norm_out increasing", increasing([r.norm_out for r in recs])))
    out_exp = fit_power_law(eps, [r.norm_out for r in recs])[0]
    in_exp = fit_power_law(eps, [r.norm_in for r in recs])[0]
    checks.append((f"norm_out exponent {out_exp:.4f} vs -0.25", abs(out_exp + 0.25) <= 0.15 * 0.25))
    checks.append((f"norm_in exponent {in_exp:.4f} vs 0.125", abs(in_exp - 0.125) <= 0.15 * 0.125))

    cubic = run_experiment(ExperimentSpec("cubic-1d", -0.8, (3, 4, 5, 6), beta=Fraction(3)))
    lb = fit_power_law([r.eps for r in cubic.records], [r.lower_bound for r in cubic.records])[0]
    checks.append((f"cubic-1d lower_bound exponent {lb:.4f} vs -0.5", abs(lb + 0.5) <= 0.15 * 0.5))
    checks.append(("cubic-1d lower_bound increasing", increasing([r.lower_bound for r in cubic.records])))

    quint = run_experiment(ExperimentSpec("quintic-1d", -0.5, (2, 3, 4, 5))).records
    checks.append(("quintic-1d norm_in decreasing", increasing([-r.norm_in for r in quint])))
    checks.append(("quintic-1d norm_out increasing", increasing([r.norm_out for r in quint])))
    elapsed = time.perf_counter() - start
    checks.append((f"runtime {elapsed:.1f}s < 120s", elapsed < 120))
    report("C9", checks)


def test_c10_cross_validation(report):
    checks = []
    for p in (2.0, 1.0):
        spec = ExperimentSpec("multiD-cubic", -0.5, (2,), p=p, beta=Fraction(1, 2), cross_validate=True)
        (c,) = run_experiment(spec).meta["cross_validation"]
        checks.append(
            (f"p={p:g} eps=1/{round(1 / c['eps'])} gap {c['relative_gap']:.3e} <= {5 * c['eps']:.4f}",
             c["eps"] == 1 / 16 and c["relative_gap"] <= 5 * c["eps"])
        )
    report("C10", checks)
