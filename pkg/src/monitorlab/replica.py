"""Symmetric-group algebra, Weingarten functions and Haar moment operators.

Permutations act on replica labels ``0..Q-1`` and are stored in one-line
notation. Composition follows function composition: ``(g * h)(i) = g(h(i))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ResourceCapError

MAX_REPLICAS = 6
MAX_PROJECTOR_ENTRIES = 10**6


@dataclass(frozen=True, order=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"{imgs} is not a permutation of 0..{len(imgs) - 1}")
        object.__setattr__(self, "images", imgs)

    @property
    def Q(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, Q: int) -> Permutation:
        return cls(tuple(range(Q)))

    @classmethod
    def from_cycles(cls, Q: int, *cycles) -> Permutation:
        """Build from 0-based cycles, e.g. ``from_cycles(3, (0, 1, 2))``."""
        images = list(range(Q))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                images[a] = b
        return cls(tuple(images))

    def __call__(self, i: int) -> int:
        return self.images[i]

    def __mul__(self, other: Permutation) -> Permutation:
        if other.Q != self.Q:
            raise ValueError("cannot compose permutations of different degree")
        return Permutation(tuple(self.images[j] for j in other.images))

    def inverse(self) -> Permutation:
        inv = [0] * self.Q
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def cycles(self) -> list[tuple[int, ...]]:
        seen = [False] * self.Q
        out = []
        for start in range(self.Q):
            if seen[start]:
                continue
            cyc = []
            i = start
            while not seen[i]:
                seen[i] = True
                cyc.append(i)
                i = self.images[i]
            out.append(tuple(cyc))
        return out

    def cycle_type(self) -> tuple[int, ...]:
        return tuple(sorted((len(c) for c in self.cycles()), reverse=True))

    def is_identity(self) -> bool:
        return self.images == tuple(range(self.Q))

    def __repr__(self):
        nontrivial = [c for c in self.cycles() if len(c) > 1]
        if not nontrivial:
            return f"e[{self.Q}]"
        return "".join("(" + " ".join(str(i + 1) for i in c) + ")" for c in nontrivial)


def cycle_count(g: Permutation) -> int:
    """Number of cycles of ``g``, fixed points included."""
    return len(g.cycles())


def swap_permutation(n: int, k: int = 1, Q: int | None = None) -> Permutation:
    """``(1 2 ... n)^{(x) k}`` acting on the first ``n k`` replicas of ``S_Q``.

    ``Q`` defaults to ``n k + 1`` (one extra replica carrying the Born weight).
    """
    if Q is None:
        Q = n * k + 1
    if n * k > Q:
        raise ValueError(f"n*k = {n * k} exceeds Q = {Q}")
    cycles = [tuple(range(j * n, (j + 1) * n)) for j in range(k)]
    return Permutation.from_cycles(Q, *cycles)


@lru_cache(maxsize=None)
def symmetric_group(Q: int) -> tuple[Permutation, ...]:
    """All elements of ``S_Q`` in lexicographic one-line order (identity first)."""
    if not 1 <= Q <= MAX_REPLICAS:
        raise ValueError(f"Q must lie in [1, {MAX_REPLICAS}]")
    return tuple(Permutation(p) for p in itertools.permutations(range(Q)))


@lru_cache(maxsize=None)
def group_index(Q: int) -> dict[Permutation, int]:
    return {g: i for i, g in enumerate(symmetric_group(Q))}


@lru_cache(maxsize=None)
def relative_cycle_matrix(Q: int) -> np.ndarray:
    """Integer matrix ``C(g^{-1} h)`` over ``S_Q`` in ``symmetric_group`` order."""
    group = symmetric_group(Q)
    out = np.empty((len(group), len(group)), dtype=np.int64)
    for a, g in enumerate(group):
        ginv = g.inverse()
        for b, h in enumerate(group):
            out[a, b] = cycle_count(ginv * h)
    out.setflags(write=False)
    return out


def perm_overlap(g: Permutation, h: Permutation, d: int) -> int:
    """``<g|h> = d^{C(g^{-1} h)}`` for single-qudit permutation states."""
    return d ** cycle_count(g.inverse() * h)


def overlap_matrix(Q: int, d: float) -> np.ndarray:
    """All overlaps ``d^{C(g^{-1} h)}`` as a ``Q! x Q!`` float matrix."""
    return float(d) ** relative_cycle_matrix(Q)


@dataclass(frozen=True)
class WeingartenTable:
    """``Wg_D`` on ``S_Q``, stored per conjugacy class (cycle type)."""

    Q: int
    D: int
    values: dict

    def __call__(self, g: Permutation) -> float:
        return self.values[g.cycle_type()]

    def matrix(self) -> np.ndarray:
        """``Wg_D(g^{-1} h)`` over ``S_Q`` in ``symmetric_group`` order."""
        group = symmetric_group(self.Q)
        per_element = np.array([self(g) for g in group])
        idx = group_index(self.Q)
        out = np.empty((len(group), len(group)))
        for a, g in enumerate(group):
            ginv = g.inverse()
            for b, h in enumerate(group):
                out[a, b] = per_element[idx[ginv * h]]
        return out


def weingarten_table(Q: int, D: int) -> WeingartenTable:
    """Weingarten function by inverting the Gram matrix ``D^{C(g^{-1} h)}``.

    Entries of the inverse are averaged over each conjugacy class to remove
    round-off asymmetry.
    """
    if D < Q:
        raise ValueError(f"Gram matrix is singular for D={D} < Q={Q}")
    group = symmetric_group(Q)
    inv = np.linalg.inv(overlap_matrix(Q, D))
    sums: dict[tuple, list] = {}
    for b, h in enumerate(group):
        sums.setdefault(h.cycle_type(), []).append(inv[0, b])
    values = {ct: float(np.mean(v)) for ct, v in sums.items()}
    return WeingartenTable(Q, D, values)


def weingarten_exact(Q: int, D: int) -> dict[tuple[int, ...], Fraction]:
    """Exact rational Weingarten values from the class-reduced defining relation.

    Solves ``sum_h Wg(g^{-1} h) D^{C(h)} = delta_{g,e}`` with one unknown per
    cycle type, taking one representative ``g`` per class.
    """
    if D < Q:
        raise ValueError(f"Gram matrix is singular for D={D} < Q={Q}")
    group = symmetric_group(Q)
    classes = sorted({g.cycle_type() for g in group}, reverse=True)
    col = {ct: i for i, ct in enumerate(classes)}
    reps = {}
    for g in group:
        reps.setdefault(g.cycle_type(), g)
    n = len(classes)
    a = [[Fraction(0)] * n for _ in range(n)]
    rhs = [Fraction(0)] * n
    for r, ct in enumerate(classes):
        g = reps[ct]
        ginv = g.inverse()
        for h in group:
            a[r][col[(ginv * h).cycle_type()]] += Fraction(D) ** cycle_count(h)
        rhs[r] = Fraction(1 if g.is_identity() else 0)
    sol = _solve_fractions(a, rhs)
    return {ct: sol[col[ct]] for ct in classes}


def _solve_fractions(a, b):
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for c in range(n):
        piv = next(r for r in range(c, n) if m[r][c] != 0)
        m[c], m[piv] = m[piv], m[c]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c] / m[c][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return [m[i][n] / m[i][i] for i in range(n)]


def permutation_state(g: Permutation, D: int) -> np.ndarray:
    """``|g> = sum_i |i_1 i_{g(1)} i_2 i_{g(2)} ...>`` in ``(C^D (x) C^D*)^{(x) Q}``."""
    Q = g.Q
    digits = np.indices((D,) * Q).reshape(Q, -1)
    idx = np.zeros(digits.shape[1], dtype=np.int64)
    for a in range(Q):
        idx = idx * D + digits[a]
        idx = idx * D + digits[g(a)]
    vec = np.zeros(D ** (2 * Q))
    vec[idx] = 1.0
    return vec


def haar_moment_projector(Q: int, D: int) -> np.ndarray:
    """Explicit ``E_U (U (x) U*)^{(x) Q} = sum Wg(g1^{-1} g2) |g1><g2|``.

    Row and column indices run over ``(i_1, i_1', ..., i_Q, i_Q')`` with the
    ket replica before its conjugate, matching ``kron(U, U*, U, U*, ...)``.
    """
    dim = D ** (2 * Q)
    if dim * dim > MAX_PROJECTOR_ENTRIES:
        raise ResourceCapError(
            f"explicit projector has {dim}^2 entries (cap {MAX_PROJECTOR_ENTRIES}); "
            "use apply_haar_moment"
        )
    group = symmetric_group(Q)
    states = np.stack([permutation_state(g, D) for g in group])
    wg = weingarten_table(Q, D).matrix()
    return states.T @ wg @ states


def apply_haar_moment(Q: int, D: int, vector: np.ndarray) -> np.ndarray:
    """Apply the Haar moment operator without materializing it."""
    group = symmetric_group(Q)
    vector = np.asarray(vector)
    if vector.shape != (D ** (2 * Q),):
        raise ValueError("vector has the wrong dimension")
    if vector.size > MAX_PROJECTOR_ENTRIES:
        raise ResourceCapError("vector exceeds the implicit-application cap")
    digits = np.indices((D,) * Q).reshape(Q, -1)
    supports = []
    for g in group:
        idx = np.zeros(digits.shape[1], dtype=np.int64)
        for a in range(Q):
            idx = idx * D + digits[a]
            idx = idx * D + digits[g(a)]
        supports.append(idx)
    overlaps = np.array([vector[idx].sum() for idx in supports])
    coeffs = weingarten_table(Q, D).matrix() @ overlaps
    out = np.zeros_like(vector, dtype=np.result_type(vector, float))
    for c, idx in zip(coeffs, supports):
        out[idx] += c
    return out

