"""Resonant amplitude system and its order-eps corrector.

The leading amplitudes obey

    i da_j/dt = sum_{Res_j} a_{k1} conj(a_{k2}) ... a_{k_{2 sigma + 1}}

(minus ``2 (sum_k |a_k|^2) a_j`` for the renormalized cubic equation).  In the
cubic one-dimensional case a corrector ``b_j`` is driven by the non-resonant
triples; see :func:`integrate_corrector`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import (
    CoverageError,
    IntegrationDiverged,
    InvalidParameters,
    RootNotFound,
    Unsupported,
)
from .modes import Mode, ModeField, as_mode
from .resonance import ResonantTuple, tuple_table

BLOWUP_FACTOR = 1e3


@dataclass(frozen=True)
class AmplitudeState:
    time: float
    values: ModeField


@dataclass(frozen=True)
class CorrectorState:
    time: float
    eps: float
    values: ModeField


@dataclass(frozen=True, eq=False)
class TransportSystem:
    """Resonance bookkeeping for a fixed set of active modes.

    ``res_index``/``res_target`` hold, for every resonant tuple drawn from the
    active modes, the indices of its entries and of its target (all indices
    refer to ``active_modes``).  ``nonres_*`` hold the non-resonant tuples
    whose target lies inside the box, with their integer divisors.
    """

    sigma: int
    d: int
    renormalized: bool
    K: int
    active_modes: tuple[Mode, ...]
    res_index: np.ndarray = field(repr=False)
    res_target: np.ndarray = field(repr=False)
    nonres_index: np.ndarray = field(repr=False)
    nonres_target: tuple[Mode, ...] = field(repr=False)
    nonres_delta: np.ndarray = field(repr=False)

    @cached_property
    def position(self) -> Mapping[Mode, int]:
        return {j: i for i, j in enumerate(self.active_modes)}

    @cached_property
    def resonance_table(self) -> dict[Mode, list[ResonantTuple]]:
        table: dict[Mode, list[ResonantTuple]] = {j: [] for j in self.active_modes}
        for row, t in zip(self.res_index, self.res_target):
            j = self.active_modes[t]
            table[j].append(ResonantTuple(tuple(self.active_modes[i] for i in row), j))
        for j in table:
            table[j].sort()
        return table

    @cached_property
    def nonresonant_table(self) -> dict[Mode, list[tuple[tuple[Mode, ...], int]]]:
        table: dict[Mode, list] = {}
        for row, j, delta in zip(self.nonres_index, self.nonres_target, self.nonres_delta):
            entries = tuple(self.active_modes[i] for i in row)
            table.setdefault(j, []).append((entries, int(delta)))
        return {j: sorted(table[j]) for j in sorted(table)}

    def vector(self, f: ModeField) -> np.ndarray:
        """Coefficients of ``f`` ordered like ``active_modes``."""
        if f.dim != self.d:
            raise InvalidParameters(f"field dim {f.dim} != system dim {self.d}")
        out = np.zeros(len(self.active_modes), dtype=complex)
        for j, c in f.items():
            if j not in self.position:
                raise InvalidParameters(f"mode {j} is not an active mode of the system")
            out[self.position[j]] = c
        return out

    def field(self, vec: np.ndarray) -> ModeField:
        return ModeField(self.d, dict(zip(self.active_modes, vec)))


def _in_box(j, K: int) -> bool:
    return max(abs(int(c)) for c in j) <= K


def build_system(
    initial_support, sigma: int, d: int, renormalized: bool = False, K: int = 8
) -> TransportSystem:
    """Close ``initial_support`` under resonant interaction inside ``[-K, K]^d``."""
    support = {as_mode(j, d) for j in initial_support}
    if not support:
        raise InvalidParameters("initial support is empty")
    if sigma < 1:
        raise InvalidParameters("sigma must be >= 1")
    if renormalized and sigma != 1:
        raise Unsupported("the renormalized equation is cubic (sigma = 1)")
    if not all(_in_box(j, K) for j in support):
        raise InvalidParameters(f"initial support is not inside the box K={K}")
    active = set(support)
    while True:
        modes = sorted(active)
        idx, targets, defect = tuple_table(modes, sigma)
        inside = np.all(np.abs(targets) <= K, axis=1)
        created = {tuple(int(c) for c in t) for t in targets[inside & (defect == 0)]}
        if created <= active:
            break
        active |= created
    position = {j: i for i, j in enumerate(modes)}
    target_modes = [tuple(int(c) for c in t) for t in targets]
    res = inside & (defect == 0)
    nonres = inside & (defect != 0)
    return TransportSystem(
        sigma=sigma,
        d=d,
        renormalized=renormalized,
        K=K,
        active_modes=tuple(modes),
        res_index=idx[res],
        res_target=np.array([position[target_modes[i]] for i in np.flatnonzero(res)], dtype=np.int64),
        nonres_index=idx[nonres],
        nonres_target=tuple(target_modes[i] for i in np.flatnonzero(nonres)),
        nonres_delta=defect[nonres],
    )


def _products(vec: np.ndarray, index: np.ndarray) -> np.ndarray:
    prod = vec[index[:, 0]].copy()
    for col in range(1, index.shape[1]):
        v = vec[index[:, col]]
        prod *= v.conj() if col % 2 else v
    return prod


def _scatter(values: np.ndarray, target: np.ndarray, size: int) -> np.ndarray:
    return np.bincount(target, weights=values.real, minlength=size) + 1j * np.bincount(
        target, weights=values.imag, minlength=size
    )


def _rhs(vec: np.ndarray, sys: TransportSystem) -> np.ndarray:
    n = len(vec)
    rhs = _scatter(_products(vec, sys.res_index), sys.res_target, n)
    if sys.renormalized:
        rhs -= 2 * np.vdot(vec, vec).real * vec
    return -1j * rhs


def transport_rhs(state: AmplitudeState, sys: TransportSystem) -> ModeField:
    """Time derivative of the amplitudes."""
    if sys.renormalized and sys.sigma != 1:
        raise Unsupported("the renormalized equation is cubic (sigma = 1)")
    return sys.field(_rhs(sys.vector(state.values), sys))


def _step_times(T: float, dt: float) -> np.ndarray:
    if not (T > 0 and dt > 0 and dt <= T * (1 + 1e-12)):
        raise InvalidParameters(f"need T > 0 and 0 < dt <= T, got T={T}, dt={dt}")
    n_full = int(math.floor(T / dt + 1e-9))
    times = dt * np.arange(n_full + 1)
    if abs(times[-1] - T) <= 1e-9 * T:
        times[-1] = T
    else:
        times = np.append(times, T)
    return times


def _rk4(f, y, t, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Amplitudes sampled at every integrator step."""

    times: np.ndarray
    modes: tuple[Mode, ...]
    values: np.ndarray
    system: TransportSystem = field(repr=False)

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise CoverageError(f"t={t} is not a sample time of the trajectory")
        return i

    def state(self, i: int) -> AmplitudeState:
        return AmplitudeState(float(self.times[i]), self.system.field(self.values[i]))

    def at(self, t: float) -> ModeField:
        return self.state(self.index_of(t)).values

    def interpolant(self) -> CubicHermiteSpline:
        """Cubic Hermite interpolant using the exact right-hand side as slope."""
        slopes = np.array([_rhs(v, self.system) for v in self.values])
        return CubicHermiteSpline(self.times, self.values, slopes, axis=0)


def integrate_transport(alpha: ModeField, sys: TransportSystem, T: float, dt: float) -> Trajectory:
    """Classical RK4 at fixed step ``dt`` on ``[0, T]``."""
    times = _step_times(T, dt)
    y = sys.vector(alpha)
    scale = np.abs(y).sum()
    out = np.empty((len(times), len(y)), dtype=complex)
    out[0] = y
    f = lambda t, v: _rhs(v, sys)
    for i in range(1, len(times)):
        y = _rk4(f, y, times[i - 1], times[i] - times[i - 1])
        norm = np.abs(y).sum()
        if not np.isfinite(norm) or norm > BLOWUP_FACTOR * scale:
            raise IntegrationDiverged(f"amplitudes left the guard at t={times[i]:.6g}")
        out[i] = y
    return Trajectory(times, sys.active_modes, out, sys)


def explicit_cubic_1d(alpha: ModeField, t: float) -> ModeField:
    """``a_j(t) = alpha_j exp(-i (2 sum_k |alpha_k|^2 - |alpha_j|^2) t)``."""
    if alpha.dim != 1:
        raise InvalidParameters("explicit_cubic_1d needs d = 1")
    mass = sum(abs(c) ** 2 for c in alpha.entries.values())
    return ModeField(
        1, {j: c * np.exp(-1j * (2 * mass - abs(c) ** 2) * t) for j, c in alpha.items()}
    )


def explicit_renormalized_1d(alpha: ModeField, t: float) -> ModeField:
    """``a_j(t) = alpha_j exp(i |alpha_j|^2 t)``; the modes decouple."""
    if alpha.dim != 1:
        raise InvalidParameters("explicit_renormalized_1d needs d = 1")
    return ModeField(1, {j: c * np.exp(1j * abs(c) ** 2 * t) for j, c in alpha.items()})


@dataclass(frozen=True, eq=False)
class CorrectorPlan:
    """Index tables for the cubic corrector over ``modes = active U created``."""

    modes: tuple[Mode, ...]
    a_slots: np.ndarray  # positions of the active modes inside ``modes``
    res_index: np.ndarray
    res_target: np.ndarray
    forcing_index: np.ndarray
    forcing_target: np.ndarray
    forcing_delta: np.ndarray
    coupling_index: np.ndarray
    coupling_target: np.ndarray
    coupling_delta: np.ndarray


def corrector_plan(sys: TransportSystem) -> CorrectorPlan:
    if sys.sigma != 1 or sys.d != 1:
        raise Unsupported("the corrector is only defined for the cubic 1-D equation")
    active = list(sys.active_modes)
    created = {j for j in sys.nonres_target}
    while True:
        modes = sorted(set(active) | created)
        in_a = np.array([j in sys.position for j in modes])
        idx, targets, defect = tuple_table(modes, 1)
        res = defect == 0
        # a tuple feeds b_target when two slots carry a and the third carries b
        a_count = in_a[idx].sum(axis=1)
        feeds = res & (a_count >= 2)
        new = {tuple(int(c) for c in t) for t in targets[feeds]}
        new = {j for j in new if _in_box(j, sys.K)} - set(modes)
        if not new:
            break
        created |= new
    position = {j: i for i, j in enumerate(modes)}
    tmodes = [tuple(int(c) for c in t) for t in targets]
    keep = res & (a_count >= 2) & np.array([j in position for j in tmodes])
    if (res & (a_count >= 2) & ~keep).any():
        raise InvalidParameters(f"corrector support leaves the box K={sys.K}")
    a_slots = np.array([position[j] for j in active], dtype=np.int64)
    coupling = ~res & (a_count >= 2) & np.array([j in position for j in tmodes])
    return CorrectorPlan(
        modes=tuple(modes),
        a_slots=a_slots,
        res_index=idx[keep],
        res_target=np.array([position[tmodes[i]] for i in np.flatnonzero(keep)], dtype=np.int64),
        forcing_index=a_slots[sys.nonres_index],
        forcing_target=np.array([position[j] for j in sys.nonres_target], dtype=np.int64),
        forcing_delta=sys.nonres_delta.astype(float),
        coupling_index=idx[coupling],
        coupling_target=np.array([position[tmodes[i]] for i in np.flatnonzero(coupling)], dtype=np.int64),
        coupling_delta=defect[coupling].astype(float),
    )


@dataclass(frozen=True, eq=False)
class CorrectorTrajectory:
    times: np.ndarray
    eps: float
    modes: tuple[Mode, ...]
    values: np.ndarray  # b_j^eps(t)
    amplitudes: np.ndarray  # a_j(t) on the same modes, zero off the active set

    def index_of(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise CoverageError(f"t={t} is not a sample time of the corrector")
        return i

    def state(self, i: int) -> CorrectorState:
        return CorrectorState(
            float(self.times[i]), self.eps, ModeField(1, dict(zip(self.modes, self.values[i])))
        )

    def at(self, t: float) -> ModeField:
        return self.state(self.index_of(t)).values

    def amplitudes_at(self, t: float) -> ModeField:
        return ModeField(1, dict(zip(self.modes, self.amplitudes[self.index_of(t)])))

    def series(self, j) -> np.ndarray:
        j = as_mode(j)
        if j not in self.modes:
            return np.zeros(len(self.times), dtype=complex)
        return self.values[:, self.modes.index(j)]

    @property
    def support(self) -> tuple[Mode, ...]:
        live = np.abs(self.values).max(axis=0) > 0
        return tuple(j for j, on in zip(self.modes, live) if on)


def integrate_corrector(
    a_traj: Trajectory,
    sys: TransportSystem,
    eps: float,
    dt: float,
    T: float | None = None,
    complete: bool = False,
) -> CorrectorTrajectory:
    """Solve the linear integral system for ``b_j^eps`` with ``b(0) = 0``.

    The explicit non-resonant part ``g_j(t) = -sum 2/delta (A(t) e^{i delta
    t/(2 eps)} - A(0))`` is evaluated pointwise, and the remainder ``c = b - g``
    solves an ODE integrated with RK4.  Amplitudes between samples of
    ``a_traj`` come from a cubic Hermite interpolant.

    By default only index-resonant triples couple ``b`` to ``a``.  With
    ``complete=True`` the non-resonant triples with one ``b`` slot are kept
    too, with their phase ``exp(i delta t/(2 eps))``.  They matter because
    ``b`` itself oscillates at those frequencies, so the product can be
    slowly varying and drift ``a + eps b`` by ``O(eps t)``.
    """
    plan = corrector_plan(sys)
    if not 0 < eps <= 1:
        raise InvalidParameters(f"eps must lie in (0, 1], got {eps}")
    t_end = float(a_traj.times[-1]) if T is None else T
    if t_end > a_traj.times[-1] * (1 + 1e-12) or a_traj.times[0] != 0:
        raise CoverageError(f"amplitude trajectory does not cover [0, {t_end}]")
    times = _step_times(t_end, dt)
    spline = a_traj.interpolant()
    n = len(plan.modes)

    def a_at(t):
        a = np.zeros(n, dtype=complex)
        a[plan.a_slots] = spline(t)
        return a

    a0 = a_at(0.0)
    A0 = _products(a0, plan.forcing_index)
    weight = 2.0 / plan.forcing_delta
    phase_rate = plan.forcing_delta / (2 * eps)

    def forcing(t, a):
        A = _products(a, plan.forcing_index)
        terms = -weight * (A * np.exp(1j * phase_rate * t) - A0)
        return _scatter(terms, plan.forcing_target, n)

    k, ell, m = plan.res_index.T
    ck, cl, cm = plan.coupling_index.T
    coupling_rate = plan.coupling_delta / (2 * eps)

    def rhs(t, c):
        a = a_at(t)
        b = c + forcing(t, a)
        terms = (
            a[k] * a[ell].conj() * b[m] + a[k] * b[ell].conj() * a[m] + b[k] * a[ell].conj() * a[m]
        )
        out = -1j * _scatter(terms, plan.res_target, n)
        if complete:
            terms = (
                a[ck] * a[cl].conj() * b[cm] + a[ck] * b[cl].conj() * a[cm] + b[ck] * a[cl].conj() * a[cm]
            ) * np.exp(1j * coupling_rate * t)
            out -= 1j * _scatter(terms, plan.coupling_target, n)
        if sys.renormalized:
            mass = np.vdot(a, a).real
            cross = 2 * np.vdot(a, b).real
            out += 2j * (b * mass + a * cross)
        return out

    c = np.zeros(n, dtype=complex)
    bs = np.zeros((len(times), n), dtype=complex)
    amps = np.zeros((len(times), n), dtype=complex)
    amps[0] = a0
    for i in range(1, len(times)):
        c = _rk4(rhs, c, times[i - 1], times[i] - times[i - 1])
        if not np.all(np.isfinite(c)):
            raise IntegrationDiverged(f"corrector diverged at t={times[i]:.6g}")
        amps[i] = a_at(times[i])
        bs[i] = c + forcing(times[i], amps[i])
    return CorrectorTrajectory(times, eps, plan.modes, bs, amps)


def b0_modulus(t, eps: float, renormalized: bool = False):
    """``|b_0^eps(t)|`` for the two-mode data ``alpha = {1: 1, 2: 1}``."""
    amp = 2.0 if renormalized else 2 * (1 - 3 * eps) / (1 + eps)
    return amp * np.abs(np.sin((1 + eps) * np.asarray(t) / (2 * eps)))


def corrector_peak_time(eps: float, renormalized: bool = False) -> float:
    """First ``t > 0`` with ``|b_0^eps(t)| = 1`` for the two-mode data."""
    if not 0 < eps <= 1:
        raise InvalidParameters(f"need 0 < eps <= 1, got {eps}")
    # |b_0| rises monotonically up to the first crest of |sin|
    crest = math.pi * eps / (1 + eps)
    f = lambda t: float(b0_modulus(t, eps, renormalized)) - 1.0
    if f(crest) < 0:
        raise RootNotFound(f"|b_0| never reaches 1 for eps={eps}")
    return brentq(f, 0.0, crest, xtol=1e-15, rtol=4 * np.finfo(float).eps)
