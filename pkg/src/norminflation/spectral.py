"""Pseudo-spectral solver for the semiclassical NLS on the torus.

Solves ``i eps u_t + (eps^2/2) Lap u = eps mu |u|^{2 sigma} u`` (optionally
with ``- 2 eps mu <|u|^2> u`` added, the renormalized cubic equation) on a
uniform grid ``x_g = 2 pi g / M`` by Strang splitting.  Grid Fourier
coefficients follow ``f(x) = sum_m c_m exp(i m.x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import AliasingError, InvalidParameters, SolverDiverged, Undersampled, Unsupported
from .modes import Mode, ModeField, as_mode


@dataclass(frozen=True, eq=False)
class GridField:
    dim: int
    M: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.M,) * self.dim:
            raise InvalidParameters(f"values must have shape {(self.M,) * self.dim}")

    def coefficients(self) -> np.ndarray:
        """Fourier coefficients in FFT index order."""
        return np.fft.fftn(self.values) / self.M**self.dim

    def mass(self) -> float:
        """``(2 pi)^{-d} int |u|^2 dx``, the grid mean of ``|u|^2``."""
        return float(np.mean(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    dt: float | None = None
    sigma: int = 1
    renormalized: bool = False
    mu: int = 1

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise InvalidParameters(f"eps must lie in (0, 1], got {self.eps}")
        n = round(1 / self.eps)
        if abs(n * self.eps - 1) > 1e-12:
            raise InvalidParameters(f"1/eps must be an integer, got eps={self.eps}")
        if self.dt is not None and not self.dt > 0:
            raise InvalidParameters(f"dt must be positive, got {self.dt}")
        if self.mu not in (1, -1):
            raise InvalidParameters(f"mu must be +1 or -1, got {self.mu}")
        if self.sigma < 1:
            raise InvalidParameters("sigma must be >= 1")
        if self.renormalized and self.sigma != 1:
            raise Unsupported("the renormalized equation is cubic (sigma = 1)")

    @property
    def inverse_eps(self) -> int:
        return round(1 / self.eps)

    @property
    def step(self) -> float:
        return self.eps / 100 if self.dt is None else self.dt


def default_grid_size(modes, eps: float) -> int:
    """Smallest power of two >= ``8 max|j|_inf / eps`` (at least 16)."""
    reach = max((max(abs(c) for c in as_mode(j)) for j in modes), default=1)
    need = 8 * max(reach, 1) / eps
    return max(16, 1 << math.ceil(math.log2(need - 1e-9)))


def wavenumbers(M: int, dim: int) -> list[np.ndarray]:
    k = np.fft.fftfreq(M, 1.0 / M).round().astype(np.int64)
    return np.meshgrid(*([k] * dim), indexing="ij", sparse=True)


def _k_squared(M: int, dim: int) -> np.ndarray:
    return sum(k.astype(float) ** 2 for k in wavenumbers(M, dim))


def modes_to_grid(f: ModeField, M: int) -> GridField:
    """Sample ``sum_j c_j exp(i j.x)`` on the ``M^d`` grid."""
    coeffs = np.zeros((M,) * f.dim, dtype=complex)
    for j, c in f.items():
        if any(abs(x) >= M / 2 for x in j):
            raise AliasingError(f"mode {j} is not resolved by M={M}")
        coeffs[tuple(x % M for x in j)] += c
    return GridField(f.dim, M, np.fft.ifftn(coeffs) * M**f.dim)


def grid_to_modes(g: GridField, box: int | None = None, tol: float = 0.0) -> ModeField:
    """Fourier coefficients of a grid field as a :class:`ModeField`.

    ``box`` keeps only modes with ``|m|_inf <= box``; ``tol`` drops
    coefficients of modulus ``<= tol`` (round-off floor).
    """
    coeffs = g.coefficients()
    ks = [k.ravel() for k in wavenumbers(g.M, g.dim)]
    mask = np.abs(coeffs) > tol
    if box is not None:
        inside = np.ones(coeffs.shape, dtype=bool)
        for axis, k in enumerate(ks):
            shape = [1] * g.dim
            shape[axis] = g.M
            inside &= (np.abs(k) <= box).reshape(shape)
        mask &= inside
    entries = {}
    for idx in zip(*np.nonzero(mask)):
        mode = tuple(int(ks[a][i]) for a, i in enumerate(idx))
        entries[mode] = coeffs[idx]
    return ModeField(g.dim, entries)


def free_propagate(g: GridField, t: float, eps: float) -> GridField:
    """Apply ``exp(i (t/2) eps Lap)``: grid mode ``m`` picks up ``exp(-i eps t |m|^2/2)``."""
    if t == 0:
        return GridField(g.dim, g.M, g.values.copy())
    phase = np.exp(-0.5j * eps * t * _k_squared(g.M, g.dim))
    return GridField(g.dim, g.M, np.fft.ifftn(phase * np.fft.fftn(g.values)))


class _Stepper:
    def __init__(self, cfg: SolverConfig, M: int, dim: int):
        self.cfg = cfg
        self.k2 = _k_squared(M, dim)
        self._h = None

    def _nonlinear(self, u, h):
        dens = np.abs(u) ** 2
        if self.cfg.renormalized:
            potential = self.cfg.mu * (dens - 2 * dens.mean())
        else:
            potential = self.cfg.mu * dens**self.cfg.sigma
        return u * np.exp(-1j * h * potential)

    def advance(self, u: np.ndarray, T: float) -> np.ndarray:
        if T <= 0:
            return u
        n = max(1, math.ceil(T / self.cfg.step - 1e-9))
        h = T / n
        if h != self._h:
            self._linear = np.exp(-0.5j * self.cfg.eps * h * self.k2)
            self._h = h
        # consecutive half nonlinear steps fuse into full ones
        u = self._nonlinear(u, h / 2)
        for i in range(n):
            u = np.fft.ifftn(self._linear * np.fft.fftn(u))
            u = self._nonlinear(u, h if i < n - 1 else h / 2)
        if not np.all(np.isfinite(u)):
            raise SolverDiverged("non-finite values in split-step solution")
        return u


def split_step(u0: GridField, cfg: SolverConfig, T: float) -> GridField:
    """Strang splitting: half nonlinear, full free, half nonlinear step.

    The step is ``cfg.step`` shrunk so that ``T`` is reached exactly.
    """
    if T < 0:
        raise InvalidParameters(f"T must be nonnegative, got {T}")
    u = _Stepper(cfg, u0.M, u0.dim).advance(u0.values.astype(complex), T)
    return GridField(u0.dim, u0.M, u)


def evolve(u0: GridField, cfg: SolverConfig, times) -> list[GridField]:
    """Solutions at the increasing sample ``times`` (the first may be 0)."""
    stepper = _Stepper(cfg, u0.M, u0.dim)
    u = u0.values.astype(complex)
    out, t_prev = [], 0.0
    for t in times:
        if t < t_prev:
            raise InvalidParameters("sample times must be nondecreasing and >= 0")
        u = stepper.advance(u, t - t_prev)
        t_prev = t
        out.append(GridField(u0.dim, u0.M, u.copy()))
    return out


def duhamel_oscillatory(A, j, omega: int, eps: float, t: float, tau=None) -> complex:
    """``int_0^t A(tau) exp(i (|j|^2 - omega) tau / (2 eps)) dtau`` by composite Simpson.

    ``A`` is either a vectorised callable, or an array of samples on the
    uniform nodes ``tau`` (which must start at 0, end at ``t`` and be spaced by
    at most ``eps/20``).  Callables are sampled at step ``<= eps/200``, finer
    when the phase rotates faster than that resolves.
    """
    j = as_mode(j)
    if t < 0 or eps <= 0:
        raise InvalidParameters("need t >= 0 and eps > 0")
    rate = (sum(c * c for c in j) - omega) / (2 * eps)
    if t == 0:
        return 0j
    if callable(A):
        h_max = min(eps / 200, 0.05 / max(abs(rate), 1e-300))
        n = 2 * math.ceil(t / (2 * h_max))
        tau = np.linspace(0.0, t, n + 1)
        values = np.asarray(A(tau), dtype=complex) * np.ones_like(tau)
    else:
        values = np.asarray(A, dtype=complex)
        if tau is None:
            raise InvalidParameters("sampled A needs its nodes tau")
        tau = np.asarray(tau, dtype=float)
        if len(tau) != len(values) or len(tau) < 3:
            raise InvalidParameters("need at least three samples, matching tau")
        if abs(tau[0]) > 1e-15 or abs(tau[-1] - t) > 1e-12 * max(1, t):
            raise InvalidParameters("samples must cover exactly [0, t]")
        if np.max(np.diff(tau)) > eps / 20 * (1 + 1e-9):
            raise Undersampled(f"sample spacing exceeds eps/20 = {eps / 20:.3g}")
    return complex(simpson(values * np.exp(1j * rate * tau), x=tau))


def physical_mode(j: Mode, eps: float) -> Mode:
    n = round(1 / eps)
    return tuple(n * c for c in j)
