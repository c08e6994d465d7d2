"""Geometric-optics approximants and their measured error orders."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AliasingError, InvalidParameters, Unsupported
from .modes import Mode, ModeField, as_mode
from .spectral import (
    GridField,
    SolverConfig,
    default_grid_size,
    evolve,
    modes_to_grid,
    wavenumbers,
)
from .transport import (
    AmplitudeState,
    CorrectorState,
    TransportSystem,
    _products,
    integrate_corrector,
    integrate_transport,
)

FIRST, SECOND = "first", "second"
DEFAULT_SAMPLES = 64


def phase(j, t: float, x) -> float:
    """``phi_j(t, x) = j.x - |j|^2 t / 2``."""
    j = as_mode(j)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if len(x) != len(j):
        raise InvalidParameters(f"point {tuple(x)} does not match mode dimension {len(j)}")
    return float(np.dot(j, x) - 0.5 * sum(c * c for c in j) * t)


@dataclass(frozen=True)
class ApproxField:
    order: str
    eps: float
    amplitudes: AmplitudeState
    correctors: Optional[CorrectorState] = None

    def __post_init__(self):
        if self.order not in (FIRST, SECOND):
            raise InvalidParameters(f"order must be 'first' or 'second', got {self.order!r}")
        if self.order == SECOND:
            b = self.correctors
            if b is None or b.eps != self.eps or abs(b.time - self.amplitudes.time) > 1e-12:
                raise InvalidParameters("second order needs correctors at the same eps and time")

    @property
    def time(self) -> float:
        return self.amplitudes.time

    def slow_coefficients(self) -> ModeField:
        """``a_j + eps b_j`` (``a_j`` alone at first order)."""
        out = self.amplitudes.values
        if self.order == SECOND:
            out = out + self.correctors.values.scaled(self.eps)
        return out

    def physical_modes(self) -> ModeField:
        """Coefficients on the physical modes ``j/eps``, phases included."""
        n = round(1 / self.eps)
        t = self.time
        return ModeField(
            self.amplitudes.values.dim,
            {
                tuple(n * c for c in j): v * np.exp(-0.5j * sum(c * c for c in j) * t / self.eps)
                for j, v in self.slow_coefficients().items()
            },
        )


def assemble(app: ApproxField, M: int) -> GridField:
    """Grid samples of ``sum_j (a_j + eps b_j) exp(i phi_j(t, x) / eps)``.

    Evaluated mode by mode in physical space, independently of the FFT.
    """
    coeffs = app.slow_coefficients()
    dim = coeffs.dim
    n = round(1 / app.eps)
    for j in coeffs:
        if any(abs(n * c) >= M / 2 for c in j):
            raise AliasingError(f"physical mode {tuple(n * c for c in j)} not resolved by M={M}")
    x = np.meshgrid(*([2 * np.pi * np.arange(M) / M] * dim), indexing="ij", sparse=True)
    out = np.zeros((M,) * dim, dtype=complex)
    for j, v in coeffs.items():
        # j.x/eps with integer multiples of 2 pi/M stays exact via modular reduction
        arg = sum((n * c) * xi for c, xi in zip(j, x))
        out = out + v * np.exp(1j * (arg - 0.5 * sum(c * c for c in j) * app.time / app.eps))
    return GridField(dim, M, out)


def residual_first_order(a: AmplitudeState, sys: TransportSystem) -> ModeField:
    """Sum of the non-resonant products ``a_{k1} conj(a_{k2}) ...`` per target."""
    vec = sys.vector(a.values)
    prods = _products(vec, sys.nonres_index)
    out: dict[Mode, complex] = {}
    for j, p in zip(sys.nonres_target, prods):
        out[j] = out.get(j, 0j) + p
    return ModeField(sys.d, out)


def placed_coefficients(f: ModeField, M: int) -> np.ndarray:
    """Dense FFT-ordered coefficient array of ``f`` on an ``M^d`` grid."""
    coeffs = np.zeros((M,) * f.dim, dtype=complex)
    for j, c in f.items():
        coeffs[tuple(x % M for x in j)] += c
    return coeffs


@dataclass(frozen=True)
class ErrorOrder:
    eps: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    residual: float
    samples: int = field(default=DEFAULT_SAMPLES)


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares slope of ``log y`` against ``log x`` and its rms residual."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    return float(slope), float(np.sqrt(np.mean(res**2)))


def sup_error(
    initial: ModeField,
    sys: TransportSystem,
    cfg: SolverConfig,
    order: str,
    T: float,
    samples: int = DEFAULT_SAMPLES,
    complete: bool = True,
) -> float:
    """``sup_t || u(t) - u_app(t) ||_W`` over ``samples`` equispaced times in ``(0, T]``.

    The Wiener norm runs over every grid mode, so anything the solver puts
    outside the approximant's modes counts as error too.  ``complete`` is
    passed to :func:`integrate_corrector`; without it the second-order error
    only improves to ``O(eps)`` on times of order one.
    """
    if cfg.mu != 1:
        raise Unsupported("the amplitude equations are written for the defocusing sign mu = +1")
    eps = cfg.eps
    times = T * np.arange(samples + 1) / samples
    interval = T / samples
    n_a = math.ceil(interval / 1e-3)
    traj = integrate_transport(initial, sys, T, interval / n_a)
    corr = None
    if order == SECOND:
        n_b = math.ceil(interval / (eps / 200))
        corr = integrate_corrector(traj, sys, eps, interval / n_b, complete=complete)
    elif order != FIRST:
        raise InvalidParameters(f"order must be 'first' or 'second', got {order!r}")
    modes = list(sys.active_modes) + (list(corr.modes) if corr is not None else [])
    M = default_grid_size(modes, eps)
    u0 = modes_to_grid(initial.relabeled(cfg.inverse_eps), M)
    worst = 0.0
    for t, u in zip(times, evolve(u0, cfg, times)):
        a = AmplitudeState(float(t), traj.at(t))
        b = CorrectorState(float(t), eps, corr.at(t)) if corr is not None else None
        app = ApproxField(order, eps, a, b)
        diff = u.coefficients() - placed_coefficients(app.physical_modes(), M)
        worst = max(worst, float(np.abs(diff).sum()))
    return worst


def error_order(
    initial: ModeField,
    sys: TransportSystem,
    cfg_template: SolverConfig,
    eps_list,
    order: str = FIRST,
    T: float = 0.5,
    samples: int = DEFAULT_SAMPLES,
    complete: bool = True,
    threads: int = 1,
) -> ErrorOrder:
    """Fit the exponent of ``sup_t ||u - u_app||_W`` against ``eps``."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise InvalidParameters("need at least three eps values")
    if not len(initial):
        raise InvalidParameters("zero data: the error vanishes and the slope is undefined")
    if threads < 1:
        raise InvalidParameters(f"threads must be >= 1, got {threads}")

    def one(eps):
        cfg = SolverConfig(
            eps=eps,
            dt=None if cfg_template.dt is None else cfg_template.dt * eps / cfg_template.eps,
            sigma=cfg_template.sigma,
            renormalized=cfg_template.renormalized,
            mu=cfg_template.mu,
        )
        return sup_error(initial, sys, cfg, order, T, samples, complete)

    if threads == 1:
        errors = [one(eps) for eps in eps_list]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = list(pool.map(one, eps_list))
    if min(errors) <= 0:
        raise InvalidParameters("an error vanished exactly; the slope is undefined")
    slope, residual = fit_power_law(eps_list, errors)
    return ErrorOrder(tuple(eps_list), tuple(errors), slope, residual, samples)
