"""Lattice-mode fields on the torus and their Fourier-Lebesgue norms.

A :class:`ModeField` stores the Fourier coefficients ``c_j`` of a
trigonometric polynomial ``f(x) = sum_j c_j exp(i j.x)`` on ``T^d``.  Modes
are plain integer tuples, so ordering is lexicographic for free.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionMismatch, InvalidNormSpec, InvalidParameters

Mode = tuple[int, ...]


def as_mode(j, dim: int | None = None) -> Mode:
    """Coerce an int or an integer sequence to a mode tuple."""
    if isinstance(j, (int, np.integer)):
        mode = (int(j),)
    else:
        mode = tuple(int(c) for c in j)
    if not mode:
        raise DimensionMismatch("mode must have at least one component")
    if dim is not None and len(mode) != dim:
        raise DimensionMismatch(f"mode {mode} does not have dimension {dim}")
    return mode


def japanese_bracket(j: Mode) -> float:
    return math.sqrt(1 + sum(c * c for c in j))


@dataclass(frozen=True)
class ModeField:
    """Finite map from modes to complex amplitudes, kept in canonical form.

    Exact zeros are dropped and entries are stored in lexicographic order, so
    two fields with the same nonzero coefficients compare equal.
    """

    dim: int
    entries: Mapping[Mode, complex] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise DimensionMismatch("dim must be >= 1")
        clean = {}
        for j, c in self.entries.items():
            mode = as_mode(j, self.dim)
            c = complex(c)
            if c != 0:
                clean[mode] = clean.get(mode, 0j) + c
        clean = {j: c for j, c in sorted(clean.items()) if c != 0}
        object.__setattr__(self, "entries", MappingProxyType(clean))

    @classmethod
    def unit(cls, modes: Iterable, dim: int | None = None) -> "ModeField":
        """Unit coefficient on each of ``modes``."""
        modes = [as_mode(j) for j in modes]
        if dim is None:
            if not modes:
                raise DimensionMismatch("cannot infer dim of an empty field")
            dim = len(modes[0])
        return cls(dim, {j: 1.0 for j in modes})

    def __getitem__(self, j) -> complex:
        return self.entries.get(as_mode(j, self.dim), 0j)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    @property
    def support(self) -> tuple[Mode, ...]:
        return tuple(self.entries)

    def scaled(self, factor: complex) -> "ModeField":
        return ModeField(self.dim, {j: factor * c for j, c in self.entries.items()})

    def relabeled(self, multiplier: int) -> "ModeField":
        """Field with every mode ``j`` moved to ``multiplier * j``."""
        return ModeField(
            self.dim,
            {tuple(multiplier * c for c in j): v for j, v in self.entries.items()},
        )

    def __add__(self, other: "ModeField") -> "ModeField":
        _check_dims(self, other)
        out = dict(self.entries)
        for j, c in other.entries.items():
            out[j] = out.get(j, 0j) + c
        return ModeField(self.dim, out)

    def __sub__(self, other: "ModeField") -> "ModeField":
        return self + other.scaled(-1)

    def to_json(self) -> str:
        payload = {
            "dim": self.dim,
            "entries": [[list(j), c.real, c.imag] for j, c in self.entries.items()],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "ModeField":
        payload = json.loads(text)
        try:
            dim = int(payload["dim"])
            entries = {}
            for j, re, im in payload["entries"]:
                mode = as_mode(j, dim)
                entries[mode] = entries.get(mode, 0j) + complex(float(re), float(im))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameters(f"malformed ModeField JSON: {exc}") from exc
        return cls(dim, entries)


def _check_dims(f: ModeField, g: ModeField):
    if f.dim != g.dim:
        raise DimensionMismatch(f"dimension mismatch: {f.dim} vs {g.dim}")


@dataclass(frozen=True)
class NormSpec:
    """Regularity ``s`` and summability ``p`` of the space FL^{s,p}."""

    s: float
    p: float = 2.0

    def __post_init__(self):
        if math.isnan(self.s) or math.isnan(self.p) or self.p < 1:
            raise InvalidNormSpec(f"need p >= 1 (or inf), got p={self.p}")


def fl_norm(f: ModeField, spec: NormSpec) -> float:
    """Fourier-Lebesgue norm ``|| <j>^s c_j ||_{l^p}``."""
    if not isinstance(spec, NormSpec):
        spec = NormSpec(*spec)
    if not len(f):
        return 0.0
    weights = np.array([japanese_bracket(j) for j in f.entries], dtype=float) ** spec.s
    # Python's abs, as in wiener_norm, so that FL^{0,1} and W agree to the bit
    terms = weights * np.array([abs(c) for c in f.entries.values()], dtype=float)
    if math.isinf(spec.p):
        return float(terms.max())
    if spec.p == 1:
        return float(math.fsum(terms))
    scale = terms.max()
    if scale == 0:
        return 0.0
    return float(scale * math.fsum((terms / scale) ** spec.p) ** (1 / spec.p))


def wiener_norm(f: ModeField) -> float:
    """``sum_j |c_j|``, the norm of the Wiener algebra FL^{0,1}."""
    return float(math.fsum(abs(c) for c in f.entries.values()))


def mode_product(f: ModeField, g: ModeField) -> ModeField:
    """Coefficients of the pointwise product ``f g`` (discrete convolution)."""
    _check_dims(f, g)
    out: dict[Mode, complex] = {}
    for k, a in f.entries.items():
        for m, b in g.entries.items():
            j = tuple(x + y for x, y in zip(k, m))
            out[j] = out.get(j, 0j) + a * b
    return ModeField(f.dim, out)


def mode_conjugate(f: ModeField) -> ModeField:
    """Coefficients of ``conj(f)``: ``c_j -> conj(c_{-j})``."""
    return ModeField(
        f.dim, {tuple(-c for c in j): v.conjugate() for j, v in f.entries.items()}
    )


@dataclass(frozen=True)
class ScalingParams:
    """Exact description of ``eps = baseN**(-kappa)`` for a rational ``beta``.

    ``kappa = 2q`` for ``beta = p/q`` in lowest terms, which makes
    ``eps**(-(1 + beta)/2) = baseN**(q + p)`` an integer for every base.
    """

    beta: Fraction
    sigma: int
    d: int
    baseN: int

    def __post_init__(self):
        beta = Fraction(self.beta)
        object.__setattr__(self, "beta", beta)
        if beta <= 0:
            raise InvalidParameters(f"beta must be positive, got {beta}")
        if self.sigma < 1 or self.d < 1:
            raise InvalidParameters("sigma and d must be positive integers")
        if self.baseN < 2:
            raise InvalidParameters(f"baseN must be >= 2, got {self.baseN}")

    @property
    def kappa(self) -> int:
        return 2 * self.beta.denominator

    @property
    def eps_exact(self) -> Fraction:
        return Fraction(1, self.baseN**self.kappa)

    @property
    def eps(self) -> float:
        return float(self.eps_exact)

    @property
    def inverse_eps(self) -> int:
        """``1/eps``; physical modes of the semiclassical field are ``j/eps``."""
        return self.baseN**self.kappa

    @property
    def spatial_multiplier(self) -> int:
        """``eps**(-(1+beta)/2)``: mode ``j`` of ``u`` becomes this times ``j`` for ``psi``."""
        return self.baseN ** (self.beta.denominator + self.beta.numerator)

    @property
    def amplitude_factor(self) -> float:
        """``eps**(-beta/(2 sigma)) = baseN**(p/sigma)``."""
        return float(self.baseN) ** (self.beta.numerator / self.sigma)

    @property
    def time_factor(self) -> Fraction:
        """``eps**beta``, so that ``t_psi = eps**beta * t_u``."""
        return Fraction(1, self.baseN ** (2 * self.beta.numerator))

    def time_to_physical(self, t_u: float) -> float:
        return float(self.time_factor) * t_u


def scale_to_physical(
    u_modes: ModeField, params: ScalingParams, amplitude_only: bool = False
) -> ModeField:
    """Map the semiclassical field ``u`` at slow time to ``psi``.

    Mode ``j`` goes to ``j * baseN**(q+p)`` and every amplitude is multiplied by
    ``eps**(-beta/(2 sigma))``.  With ``amplitude_only`` the modes keep their
    labels; Wiener and l^p norms with ``s = 0`` are unaffected by that choice.
    """
    if u_modes.dim != params.d:
        raise DimensionMismatch(f"field dim {u_modes.dim} != params.d {params.d}")
    out = u_modes.scaled(params.amplitude_factor)
    if amplitude_only:
        return out
    return out.relabeled(params.spatial_multiplier)
