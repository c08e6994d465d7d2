"""Norm-inflation sequences built from the geometric-optics approximants.

For each base ``N`` the semiclassical parameter is ``eps = N**(-kappa)`` and
the field ``psi`` of the original equation is read off from ``u^eps`` by the
scaling map of :class:`~norminflation.modes.ScalingParams`.  All norms of
``psi`` are finite sums over modes, so nothing here needs a grid unless the
solver cross-check is requested.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .approx import fit_power_law
from .errors import InfeasibleRegularity, InvalidParameters
from .modes import ModeField, NormSpec, ScalingParams, fl_norm, scale_to_physical
from .spectral import SolverConfig, default_grid_size, evolve, grid_to_modes, modes_to_grid
from .transport import (
    TransportSystem,
    build_system,
    corrector_peak_time,
    integrate_corrector,
    integrate_transport,
)

CASES = (
    "multiD-cubic",
    "multiD-higher",
    "quintic-1d",
    "cubic-1d",
    "renormalized-1d",
    "renormalized-multiD",
)
ONE_D_CORRECTOR = ("cubic-1d", "renormalized-1d")
MARGIN = 1.05
MAX_DENOMINATOR = 8
TRANSPORT_DT = 1e-3
# smallest eps at which the split-step cross-check is still affordable
SOLVER_FLOOR = {1: 1 / 64, 2: 1 / 32}


def _check_case(case: str, sigma: int, d: int):
    if case not in CASES:
        raise InvalidParameters(f"unknown case {case!r}; expected one of {', '.join(CASES)}")
    ok = {
        "multiD-cubic": sigma == 1 and d >= 2,
        "multiD-higher": sigma >= 2 and d >= 2,
        "quintic-1d": sigma == 2 and d == 1,
        "cubic-1d": sigma == 1 and d == 1,
        "renormalized-1d": sigma == 1 and d == 1,
        "renormalized-multiD": sigma == 1 and d >= 2,
    }[case]
    if not ok:
        raise InvalidParameters(f"case {case} is inconsistent with sigma={sigma}, d={d}")


def default_sigma_d(case: str) -> tuple[int, int]:
    return {
        "multiD-cubic": (1, 2),
        "multiD-higher": (2, 2),
        "quintic-1d": (2, 1),
        "cubic-1d": (1, 1),
        "renormalized-1d": (1, 1),
        "renormalized-multiD": (1, 2),
    }[case]


def feasibility_margins(s: float, sigma: int, case: str, beta) -> dict[str, float]:
    """Ratios ``lhs / rhs`` of the strict inequalities that ``beta`` must meet.

    Every ratio must exceed 1; :func:`choose_beta` asks for ``MARGIN``.
    """
    beta = float(beta)
    a = abs(s)
    if case in ONE_D_CORRECTOR:
        return {"beta_over_2": beta / 2, "input_decay": a * (beta + 1) / beta}
    return {"input_decay": a * (beta + 1) * sigma / beta}


def choose_beta(s: float, sigma: int, case: str) -> Fraction:
    """Smallest-denominator, then smallest-numerator ``beta = p/q`` with ``q <= 8``
    that meets the feasibility inequalities with a 5% margin."""
    if not s < 0:
        raise InvalidParameters(f"s must be negative, got {s}")
    if case in ONE_D_CORRECTOR and s >= -2 / 3:
        raise InfeasibleRegularity(f"case {case} needs s < -2/3, got s={s}")
    for q in range(1, MAX_DENOMINATOR + 1):
        for p in range(1, 64 * q + 1):
            if math.gcd(p, q) != 1:
                continue
            if all(v >= MARGIN for v in feasibility_margins(s, sigma, case, Fraction(p, q)).values()):
                return Fraction(p, q)
    raise InfeasibleRegularity(
        f"no beta with denominator <= {MAX_DENOMINATOR} is feasible for s={s}, case {case}"
    )


def initial_data(case: str, params: ScalingParams) -> ModeField:
    """Unit coefficients on the slow modes of ``u^eps(0)``."""
    _check_case(case, params.sigma, params.d)
    d = params.d
    if case == "quintic-1d":
        return ModeField.unit([2, -1, -2, 4, 3], 1)
    if case in ONE_D_CORRECTOR:
        return ModeField.unit([1, 2], 1)
    e1 = (1, 0) + (0,) * (d - 2)
    e2 = (0, 1) + (0,) * (d - 2)
    e12 = (1, 1) + (0,) * (d - 2)
    return ModeField.unit([e1, e2, e12], d)


@dataclass(frozen=True)
class ExperimentSpec:
    case: str
    s: float
    baseN_list: tuple[int, ...]
    sigma: Optional[int] = None
    d: Optional[int] = None
    r: float = 0.0
    p: float = 2.0
    beta: Optional[Fraction] = None
    tau: float = 0.1
    K: int = 8
    cross_validate: bool = False

    def __post_init__(self):
        if self.case not in CASES:
            raise InvalidParameters(f"unknown case {self.case!r}; expected one of {', '.join(CASES)}")
        sigma, d = default_sigma_d(self.case)
        object.__setattr__(self, "sigma", sigma if self.sigma is None else int(self.sigma))
        object.__setattr__(self, "d", d if self.d is None else int(self.d))
        _check_case(self.case, self.sigma, self.d)
        NormSpec(self.s, self.p)
        NormSpec(self.r, self.p)
        if not self.s < 0:
            raise InvalidParameters(f"s must be negative, got {self.s}")
        bases = tuple(sorted(int(b) for b in self.baseN_list))
        if not bases or bases[0] < 2 or len(set(bases)) != len(bases):
            raise InvalidParameters("baseN_list must hold distinct integers >= 2")
        object.__setattr__(self, "baseN_list", bases)
        if not self.tau > 0:
            raise InvalidParameters(f"tau must be positive, got {self.tau}")
        if self.beta is None:
            object.__setattr__(self, "beta", choose_beta(self.s, self.sigma, self.case))
        else:
            beta = Fraction(self.beta)
            object.__setattr__(self, "beta", beta)
            if beta <= 0:
                raise InvalidParameters(f"beta must be positive, got {beta}")
            if self.case in ONE_D_CORRECTOR and self.s >= -2 / 3:
                raise InfeasibleRegularity(f"case {self.case} needs s < -2/3, got s={self.s}")
            bad = [k for k, v in feasibility_margins(self.s, self.sigma, self.case, beta).items() if v <= 1]
            if bad:
                raise InfeasibleRegularity(f"beta={beta} violates {', '.join(bad)} for s={self.s}")

    @property
    def renormalized(self) -> bool:
        return self.case.startswith("renormalized")


@dataclass(frozen=True)
class InflationRecord:
    n: int
    baseN: int
    kappa: int
    eps: float
    t_n: float
    norm_in: float
    norm_out: float
    zero_mode_abs: float
    lower_bound: float


@dataclass
class InflationRun:
    records: list[InflationRecord]
    meta: dict = field(default_factory=dict)


def _zero(d: int):
    return (0,) * d


def _first_order_profile(spec: ExperimentSpec, sys: TransportSystem, alpha: ModeField) -> ModeField:
    n_steps = math.ceil(spec.tau / TRANSPORT_DT - 1e-9)
    traj = integrate_transport(alpha, sys, spec.tau, spec.tau / n_steps)
    return traj.at(spec.tau)


def _slow_field(coeffs: ModeField, t: float, eps: float) -> ModeField:
    """Attach the free phase ``exp(-i |j|^2 t/(2 eps))`` to slow coefficients."""
    return ModeField(
        coeffs.dim,
        {j: v * np.exp(-0.5j * sum(c * c for c in j) * t / eps) for j, v in coeffs.items()},
    )


def _corrector_profile(spec: ExperimentSpec, sys: TransportSystem, alpha: ModeField, eps: float):
    """``(tau_eps, a + eps b, b_0)`` at the corrector peak time."""
    tau = corrector_peak_time(eps, spec.renormalized)
    n_steps = math.ceil(tau / TRANSPORT_DT - 1e-9)
    traj = integrate_transport(alpha, sys, tau, tau / n_steps)
    corr = integrate_corrector(traj, sys, eps, eps / 200, T=tau)
    b = corr.at(tau)
    return tau, traj.at(tau) + b.scaled(eps), b[_zero(1)]


def _solver_slow_field(spec: ExperimentSpec, alpha: ModeField, eps: float, t: float, extra_modes) -> ModeField:
    cfg = SolverConfig(eps=eps, sigma=spec.sigma, renormalized=spec.renormalized)
    n = cfg.inverse_eps
    M = default_grid_size(list(alpha) + list(extra_modes), eps)
    u0 = modes_to_grid(alpha.relabeled(n), M)
    (u,) = evolve(u0, cfg, [t])
    on_lattice = {
        tuple(c // n for c in m): v for m, v in grid_to_modes(u).items() if all(c % n == 0 for c in m)
    }
    return ModeField(alpha.dim, on_lattice)


def _record(spec, idx, baseN, slow_out, t_slow, lower_factor, *, alpha) -> InflationRecord:
    params = ScalingParams(spec.beta, spec.sigma, spec.d, baseN)
    psi0 = scale_to_physical(alpha, params)
    psi_t = scale_to_physical(slow_out, params)
    zero_abs = abs(psi_t[_zero(spec.d)])
    return InflationRecord(
        n=idx,
        baseN=baseN,
        kappa=params.kappa,
        eps=params.eps,
        t_n=params.time_to_physical(t_slow),
        norm_in=fl_norm(psi0, NormSpec(spec.s, spec.p)),
        norm_out=fl_norm(psi_t, NormSpec(spec.r, spec.p)),
        zero_mode_abs=zero_abs,
        lower_bound=lower_factor,
    )


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> InflationRun:
    """Records for every base in ``spec.baseN_list`` plus run metadata."""
    if threads < 1:
        raise InvalidParameters(f"threads must be >= 1, got {threads}")
    probe = ScalingParams(spec.beta, spec.sigma, spec.d, spec.baseN_list[0])
    alpha = initial_data(spec.case, probe)
    sys = build_system(list(alpha), spec.sigma, spec.d, spec.renormalized, spec.K)
    corrector = spec.case in ONE_D_CORRECTOR
    a_tau = None if corrector else _first_order_profile(spec, sys, alpha)

    def one(item):
        idx, baseN = item
        params = ScalingParams(spec.beta, spec.sigma, spec.d, baseN)
        eps = params.eps
        if corrector:
            t_slow, coeffs, b0 = _corrector_profile(spec, sys, alpha, eps)
            lower = eps ** (1 - float(spec.beta) / 2) * abs(b0)
        else:
            t_slow, coeffs = spec.tau, a_tau
            lower = params.amplitude_factor * abs(a_tau[_zero(spec.d)])
        slow_out = _slow_field(coeffs, t_slow, eps)
        rec = _record(spec, idx, baseN, slow_out, t_slow, lower, alpha=alpha)
        check = None
        floor = SOLVER_FLOOR.get(spec.d)
        if spec.cross_validate and floor is not None and eps >= floor * (1 - 1e-12):
            solved = _solver_slow_field(spec, alpha, eps, t_slow, coeffs)
            out = fl_norm(scale_to_physical(solved, params), NormSpec(spec.r, spec.p))
            check = {
                "n": idx,
                "eps": eps,
                "norm_out_approx": rec.norm_out,
                "norm_out_solver": out,
                "relative_gap": abs(rec.norm_out - out) / rec.norm_out,
            }
        return rec, t_slow, check

    items = list(enumerate(spec.baseN_list, start=1))
    if threads == 1:
        results = [one(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, items))
    records = [r for r, _, _ in results]
    meta = {
        "case": spec.case,
        "sigma": spec.sigma,
        "d": spec.d,
        "beta": str(spec.beta),
        "feasibility_margins": feasibility_margins(spec.s, spec.sigma, spec.case, spec.beta),
        "K": spec.K,
        "active_modes": [list(j) for j in sys.active_modes],
    }
    if corrector:
        meta["tau_eps"] = [t for _, t, _ in results]
    else:
        meta["tau"] = spec.tau
        meta["zero_mode_amplitude"] = abs(a_tau[_zero(spec.d)])
    meta["expected_exponents"] = expected_exponents(spec)
    if len(records) >= 2:
        eps = [r.eps for r in records]
        meta["fitted_exponents"] = {
            name: fit_power_law(eps, [getattr(r, name) for r in records])[0]
            for name in ("norm_in", "norm_out", "lower_bound")
            if all(getattr(r, name) > 0 for r in records)
        }
    if spec.cross_validate:
        meta["cross_validation"] = [c for _, _, c in results if c is not None]
        meta["solver_floor_eps"] = SOLVER_FLOOR.get(spec.d)
    return InflationRun(records, meta)


def expected_exponents(spec: ExperimentSpec) -> dict[str, float]:
    """Predicted powers of ``eps`` for the input norm and the output lower bound."""
    beta = float(spec.beta)
    amp = -beta / (2 * spec.sigma)
    out = {"norm_in": amp + abs(spec.s) * (beta + 1) / 2}
    out["lower_bound"] = 1 - beta / 2 if spec.case in ONE_D_CORRECTOR else amp
    return out


def run_inflation(spec: ExperimentSpec, threads: int = 1) -> list[InflationRecord]:
    return run_experiment(spec, threads).records
