"""Resonant sets of lattice modes.

A tuple ``(k_1, ..., k_{2 sigma + 1})`` is resonant for the target ``j`` when
both alternating sums match::

    k_1 - k_2 + k_3 - ... + k_{2 sigma + 1} == j
    |k_1|^2 - |k_2|^2 + ... + |k_{2 sigma + 1}|^2 == |j|^2

Everything here is exact integer arithmetic.  :func:`enumerate_resonant` is a
brute-force oracle; the closed forms for the cubic case are checked against it.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameters
from .modes import Mode, as_mode

_BLOCK_ROWS = 1 << 20


def _signs(n: int) -> np.ndarray:
    return np.array([1 if ell % 2 == 0 else -1 for ell in range(n)], dtype=np.int64)


def is_resonant(entries, j) -> bool:
    j = as_mode(j)
    entries = tuple(as_mode(k, len(j)) for k in entries)
    if len(entries) % 2 == 0:
        raise InvalidParameters(f"tuple length must be odd, got {len(entries)}")
    lin = [0] * len(j)
    quad = 0
    for ell, k in enumerate(entries):
        sign = 1 if ell % 2 == 0 else -1
        for c in range(len(j)):
            lin[c] += sign * k[c]
        quad += sign * sum(x * x for x in k)
    return tuple(lin) == j and quad == sum(x * x for x in j)


@dataclass(frozen=True, order=True)
class ResonantTuple:
    entries: tuple[Mode, ...]
    target: Mode

    def __post_init__(self):
        entries = tuple(as_mode(k) for k in self.entries)
        target = as_mode(self.target)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "target", target)
        if not is_resonant(entries, target):
            raise InvalidParameters(f"{entries} is not resonant for target {target}")

    @classmethod
    def _trusted(cls, entries: tuple[Mode, ...], target: Mode) -> "ResonantTuple":
        """Skip validation for rows whose identities were already checked in bulk."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "entries", entries)
        object.__setattr__(obj, "target", target)
        return obj

    @property
    def sigma(self) -> int:
        return (len(self.entries) - 1) // 2

    def flat(self) -> tuple[int, ...]:
        return tuple(c for k in self.entries for c in k)


def box_points(K: int, d: int) -> np.ndarray:
    """All points of ``[-K, K]^d`` in lexicographic order, shape ``(n, d)``."""
    axis = np.arange(-K, K + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _check_box(j: Mode, K: int):
    if K < 0 or max(abs(c) for c in j) > K:
        raise InvalidParameters(f"box K={K} does not contain target {j}")


def _canonical(arr: np.ndarray, n: int, d: int) -> np.ndarray:
    """Distinct flattened rows in lexicographic order."""
    if len(arr) == 0:
        return np.zeros((0, n * d), dtype=np.int64)
    return np.unique(arr.reshape(len(arr), n * d), axis=0)


def _to_tuples(rows: np.ndarray, d: int, j: Mode) -> list[ResonantTuple]:
    make = ResonantTuple._trusted
    return [make(tuple(zip(*[iter(row)] * d)), j) for row in rows.tolist()]


def resonant_rows(j, sigma: int, K: int) -> np.ndarray:
    """Brute-force ``Res_j`` on ``[-K, K]^d`` as sorted flattened integer rows.

    The first ``2 sigma`` entries range over the whole box; the last one is
    fixed by the linear identity, and the quadratic identity is then tested
    directly.
    """
    j = as_mode(j)
    if sigma < 1:
        raise InvalidParameters("sigma must be >= 1")
    _check_box(j, K)
    d = len(j)
    n = 2 * sigma + 1
    pts = box_points(K, d)
    sq = (pts * pts).sum(axis=1)
    jv = np.array(j, dtype=np.int64)
    jsq = int(jv @ jv)
    signs = _signs(n)
    # partial sums over slots 2 .. n-1 are shared by every choice of the first entry
    rest = np.array(list(itertools.product(range(len(pts)), repeat=n - 2)), dtype=np.int64)
    rest = rest.reshape(-1, n - 2)
    rest_lin = np.einsum("l,rld->rd", signs[1 : n - 1], pts[rest])
    rest_quad = (signs[1 : n - 1] * sq[rest]).sum(axis=1)
    block = max(1, _BLOCK_ROWS // len(rest))
    found = [np.zeros((0, n, d), dtype=np.int64)]
    for start in range(0, len(pts), block):
        first = np.arange(start, min(start + block, len(pts)))
        last = jv - pts[first][:, None, :] - rest_lin[None, :, :]  # last slot has sign +1
        quad = sq[first][:, None] + rest_quad[None, :] + (last * last).sum(axis=2)
        ok = np.all(np.abs(last) <= K, axis=2) & (quad == jsq)
        fi, ri = np.nonzero(ok)
        if len(fi):
            found.append(
                np.concatenate(
                    [pts[first[fi]][:, None, :], pts[rest[ri]], last[fi, ri][:, None, :]], axis=1
                )
            )
    return _canonical(np.concatenate(found), n, d)


def enumerate_resonant(j, sigma: int, K: int) -> list[ResonantTuple]:
    """Brute-force ``Res_j`` restricted to entries in ``[-K, K]^d``, sorted
    lexicographically.  See :func:`resonant_rows`."""
    j = as_mode(j)
    return _to_tuples(resonant_rows(j, sigma, K), len(j), j)


def cubic_rows(j, K: int) -> np.ndarray:
    """Closed-form cubic ``Res_j`` as sorted flattened rows (any ``d``).

    ``(k, l, m)`` is resonant iff ``l = k + m - j`` and ``(k - j).(m - j) = 0``:
    the four points form a rectangle with ``l`` opposite ``j``, possibly
    degenerate (``k = j`` or ``m = j``).  In one dimension this leaves
    ``k = j`` or ``m = j``.
    """
    j = as_mode(j)
    d = len(j)
    _check_box(j, K)
    pts = box_points(K, d)
    jv = np.array(j, dtype=np.int64)
    if d == 1:
        ell = pts[pts[:, 0] != j[0]]
        js = np.broadcast_to(jv, ell.shape)
        tup = np.concatenate(
            [np.stack([js, ell, ell], axis=1), np.stack([ell, ell, js], axis=1), np.stack([jv, jv, jv])[None]]
        )
        return _canonical(tup, 3, 1)
    rel = pts - jv
    ki, mi = np.nonzero(rel @ rel.T == 0)
    ells = pts[ki] + pts[mi] - jv
    keep = np.all(np.abs(ells) <= K, axis=1)
    tup = np.stack([pts[ki[keep]], ells[keep], pts[mi[keep]]], axis=1)
    return _canonical(tup, 3, d)


def resonant_cubic_1d(j, K: int) -> list[ResonantTuple]:
    """``{(j, l, l), (l, l, j) : l != j} U {(j, j, j)}`` on the box ``|l| <= K``."""
    j = as_mode(j)
    if len(j) != 1:
        raise InvalidParameters("resonant_cubic_1d needs d = 1")
    return _to_tuples(cubic_rows(j, K), 1, j)


def resonant_cubic_multid(j, K: int) -> list[ResonantTuple]:
    """Cubic ``Res_j`` for ``d >= 2`` via the rectangle characterisation of
    :func:`cubic_rows`."""
    j = as_mode(j)
    if len(j) < 2:
        raise InvalidParameters("resonant_cubic_multid needs d >= 2")
    return _to_tuples(cubic_rows(j, K), len(j), j)


def quintic_tuple(p: int, q: int) -> ResonantTuple:
    """Five nonzero modes ``(pq, -q^2, -pq, p^2, p^2 - q^2)`` resonant for 0."""
    if p == 0 or q == 0 or p in (q, -q):
        raise InvalidParameters(f"need p, q != 0 and p not in {{q, -q}}, got p={p}, q={q}")
    entries = tuple((v,) for v in (p * q, -q * q, -p * q, p * p, p * p - q * q))
    return ResonantTuple(entries, (0,))


def pad_tuple(triple: ResonantTuple, sigma: int) -> tuple[ResonantTuple, ResonantTuple, ResonantTuple]:
    """Lift a cubic resonant triple to ``2 sigma + 1`` entries.

    Appending ``2 sigma - 2`` copies of one entry adds pairs that cancel in both
    alternating sums.
    """
    if len(triple.entries) != 3:
        raise InvalidParameters("pad_tuple expects a cubic triple")
    if sigma < 2:
        raise InvalidParameters(f"padding needs sigma >= 2, got {sigma}")
    k, ell, m = triple.entries
    return tuple(
        ResonantTuple((k, ell, m) + (extra,) * (2 * sigma - 2), triple.target)
        for extra in (k, ell, m)
    )


def tuple_table(modes, sigma: int):
    """Every ``(2 sigma + 1)``-tuple drawn from ``modes``, classified.

    Returns ``(index, targets, defect)``: ``index`` has one row of indices into
    ``modes`` per tuple, ``targets`` the alternating vector sum, and ``defect``
    the integer ``|j|^2 - sum (-1)^{l+1} |k_l|^2`` (zero exactly on resonance).
    """
    pts = np.array([as_mode(k) for k in modes], dtype=np.int64)
    if pts.ndim != 2 or len(pts) == 0:
        raise InvalidParameters("need a nonempty set of modes")
    n = 2 * sigma + 1
    idx = np.indices((len(pts),) * n).reshape(n, -1).T
    signs = _signs(n)
    targets = np.einsum("l,tld->td", signs, pts[idx])
    sq = (pts * pts).sum(axis=1)
    quad = (signs * sq[idx]).sum(axis=1)
    defect = (targets * targets).sum(axis=1) - quad
    return idx, targets, defect

