"""Replica statistical mechanics of monitored brickwork circuits.

The Haar average of each gate leaves two permutation spins per gate, an
in-spin and an out-spin joined by a Weingarten link. Tensor legs between
gates carry overlap weights ``d^{C(g^-1 h)}`` (or ``d`` when measured). The
in-spin of every gate is summed right away, which leaves one out-spin per
gate and the triangle weight

    J[a, b, k] = sum_l V_left[a, l] V_right[b, l] Wg(l^-1 k)

for incoming out-spins ``a, b``. Contraction runs gate by gate in time order
over a frontier tensor with one axis per node that still owns an open leg.

Leg conventions for the open chain:
  * a leg runs along one wire from one node to the next; edge wires idle
    for a layer, so their legs span two measurement slots;
  * the measurement after layer ``k`` sits on every leg that crosses the
    slot between layers ``k`` and ``k + 1``; a leg is measured if any of
    its slots is;
  * the bottom legs attach to ``|0...0>`` (free) or to a pinned
    permutation; the top legs attach to the boundary permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.special import logsumexp

from .errors import InvariantViolation, ResourceCapError
from .replica import (
    Permutation,
    WeingartenTable,
    cycle_count,
    group_index,
    overlap_matrix,
    swap_permutation,
    symmetric_group,
    weingarten_table,
)

MAX_STATE_ENTRIES = 2**24
MAX_FK_LINKS = 24
MAX_SPIN_CONFIGS = 2**24


# --- local weights -----------------------------------------------------------


def link_weight(g: Permutation, h: Permutation, d: int, p: float) -> float:
    """Measurement-averaged leg weight ``(1 - p) d^{C(g^-1 h)} + p d``."""
    return (1.0 - p) * float(d) ** cycle_count(g.inverse() * h) + p * d


def fixed_config_link_weight(g: Permutation, h: Permutation, d: int, measured: bool) -> float:
    """Leg weight for a frozen measurement layout: ``d`` if measured, else the overlap."""
    if measured:
        return float(d)
    return float(d) ** cycle_count(g.inverse() * h)


def triangle_weight(
    gi: Permutation,
    gj: Permutation,
    gk: Permutation,
    d: int,
    p: float,
    weingarten: WeingartenTable | None = None,
) -> float:
    """Down-triangle weight with the in-spin ``g_l`` summed out."""
    Q = gk.Q
    if weingarten is None:
        weingarten = weingarten_table(Q, d * d)
    return float(
        sum(
            link_weight(gi, gl, d, p) * link_weight(gj, gl, d, p) * weingarten(gl.inverse() * gk)
            for gl in symmetric_group(Q)
        )
    )


def potts_triangle_weight(gi: Permutation, gj: Permutation, gk: Permutation, p: float) -> float:
    """Infinite-``d`` factorized triangle weight: one Potts bond per input leg."""
    bi = (1.0 - p) * (gi == gk) + p
    bj = (1.0 - p) * (gj == gk) + p
    return bi * bj


def purity_closed_form(d: int, t) -> np.ndarray | float:
    """``(2d / (d^2 + 1))^{2t}``: Haar-averaged half-chain purity far from the edges."""
    return (2.0 * d / (d * d + 1.0)) ** (2 * np.asarray(t))


# --- models and boundaries ---------------------------------------------------


@dataclass(frozen=True)
class BoundaryConfig:
    """Top boundary ``g_SWAP`` on ``region`` and ``e`` elsewhere.

    ``Q = n k + 1`` (one extra replica for the Born weight); ``k=None`` gives
    ``Q = n`` with a single ``n``-cycle, the unnormalized moment used for the
    purity.
    """

    region: tuple[int, ...]
    n: int = 2
    k: int | None = None

    def __post_init__(self):
        reg = tuple(sorted(int(x) for x in self.region))
        if reg and reg != tuple(range(reg[0], reg[-1] + 1)):
            raise ValueError("region must be contiguous")
        object.__setattr__(self, "region", reg)

    @property
    def Q(self) -> int:
        return self.n if self.k is None else self.n * self.k + 1

    @property
    def swap(self) -> Permutation:
        if self.k is None:
            return swap_permutation(self.n, 1, self.n)
        return swap_permutation(self.n, self.k)

    def top(self, width: int) -> tuple[Permutation, ...]:
        e = Permutation.identity(self.Q)
        if self.region and self.region[-1] >= width:
            raise ValueError("region exceeds the lattice width")
        return tuple(self.swap if x in self.region else e for x in range(width))

    def uniform(self, width: int) -> tuple[Permutation, ...]:
        return (Permutation.identity(self.Q),) * width


@dataclass(frozen=True)
class LatticeModel:
    """Replica model of a brickwork circuit of ``width`` sites and ``depth`` steps.

    ``measured`` (shape ``(2 depth, width)``) freezes the measurement layout;
    otherwise every slot is averaged with rate ``p``. ``lattice_kind`` is
    ``"honeycomb"`` for Haar circuits and ``"square"`` for the random tensor
    network, where each node carries a single spin and no Weingarten link.
    ``bottom_boundary=None`` is the free boundary of a product initial state.
    """

    Q: int
    d: int
    width: int
    depth: int
    p: float = 0.0
    lattice_kind: str = "honeycomb"
    top_boundary: tuple[Permutation, ...] | None = None
    bottom_boundary: Permutation | None = None
    measured: np.ndarray | None = None

    def __post_init__(self):
        if self.lattice_kind not in ("honeycomb", "square"):
            raise ValueError(f"unknown lattice kind {self.lattice_kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.width < 1 or self.depth < 0:
            raise ValueError("need width >= 1 and depth >= 0")
        if self.top_boundary is not None and len(self.top_boundary) != self.width:
            raise ValueError("top boundary needs one permutation per site")
        if self.measured is not None:
            m = np.asarray(self.measured, dtype=bool)
            if m.shape != (2 * self.depth, self.width):
                raise ValueError("measured mask must have shape (2*depth, width)")
            object.__setattr__(self, "measured", m)


@dataclass(frozen=True)
class ContractionResult:
    log_abs: float
    sign: float

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_abs)


class _Legs:
    """Leg-weight matrices ``V[a, l]`` between consecutive spins on one wire."""

    def __init__(self, model: LatticeModel):
        self.model = model
        self.q = math.factorial(model.Q)
        self.overlap = overlap_matrix(model.Q, model.d)
        bottom = model.bottom_boundary
        self.bottom_index = None if bottom is None else group_index(model.Q)[bottom]

    def matrix(self, wire: int, start: int, stop: int) -> np.ndarray:
        """Weights for a leg leaving a node at layer ``start`` (-1: bottom) into layer ``stop``."""
        m = self.model
        slots = range(max(start, 0), stop)
        if m.measured is not None:
            hit = bool(np.any(m.measured[list(slots), wire])) if len(slots) else False
            mat = np.full_like(self.overlap, m.d) if hit else self.overlap
        else:
            keep = (1.0 - m.p) ** len(slots)
            mat = keep * self.overlap + (1.0 - keep) * m.d
        if start >= 0:
            return mat
        if self.bottom_index is None:
            return np.ones((1, self.q))
        return mat[self.bottom_index : self.bottom_index + 1]


def _free_id(used: set[int]) -> int:
    i = 0
    while i in used:
        i += 1
    if i >= 52:
        raise ResourceCapError("frontier exceeds 52 open nodes")
    return i


def contract_signed(
    model: LatticeModel, boundary: BoundaryConfig | Sequence[Permutation] | None = None
) -> ContractionResult:
    """Exact partition function as ``(log|Z|, sign)``.

    Entries are rescaled by their maximum after every gate, with the scale
    accumulated in log space, so deep circuits neither overflow nor underflow.
    """
    if boundary is None:
        top = model.top_boundary
        if top is None:
            raise ValueError("no top boundary given")
    elif isinstance(boundary, BoundaryConfig):
        top = boundary.top(model.width)
    else:
        top = tuple(boundary)
    if len(top) != model.width or any(g.Q != model.Q for g in top):
        raise ValueError("top boundary does not match the model")

    L, Q = model.width, model.Q
    legs = _Legs(model)
    q = legs.q
    if model.lattice_kind == "honeycomb":
        gate_op = weingarten_table(Q, model.d**2).matrix()
    else:
        gate_op = np.eye(q)
    idx = group_index(Q)

    # each wire starts on its own size-1 bottom node
    T = np.ones((1,) * L)
    axes = list(range(L))
    owner = list(range(L))
    last = [-1] * L
    log_scale = 0.0

    for layer in range(2 * model.depth):
        for x in range(layer % 2, L - 1, 2):
            A, B = owner[x], owner[x + 1]
            va = legs.matrix(x, last[x], layer)
            vb = legs.matrix(x + 1, last[x + 1], layer)
            others = [owner[w] for w in range(L) if w not in (x, x + 1)]
            N = _free_id(set(axes))
            if A == B:
                J = np.einsum("al,al,lk->ak", va, vb, gate_op)
                jaxes = [A, N]
            else:
                J = np.einsum("al,bl,lk->abk", va, vb, gate_op)
                jaxes = [A, B, N]
            out = [a for a in axes if a in others] + [N]
            dims = dict(zip(axes, T.shape))
            size = q * math.prod(dims[a] for a in out[:-1])
            if size > MAX_STATE_ENTRIES:
                raise ResourceCapError(
                    f"frontier tensor needs {size} entries (cap {MAX_STATE_ENTRIES})"
                )
            T = np.einsum(T, axes, J, jaxes, out)
            axes = out
            owner[x] = owner[x + 1] = N
            last[x] = last[x + 1] = layer
            scale = np.abs(T).max()
            if scale == 0.0:
                return ContractionResult(-math.inf, 0.0)
            T = T / scale
            log_scale += math.log(scale)

    # close every open leg on the top boundary
    top_layer = 2 * model.depth
    for w in range(L):
        v = legs.matrix(w, last[w], top_layer)[:, idx[top[w]]]
        ax = axes.index(owner[w])
        shape = [1] * T.ndim
        shape[ax] = v.shape[0]
        T = T * v.reshape(shape)
    total = float(T.sum())
    if total == 0.0:
        return ContractionResult(-math.inf, 0.0)
    return ContractionResult(log_scale + math.log(abs(total)), math.copysign(1.0, total))


def contract(
    model: LatticeModel, boundary: BoundaryConfig | Sequence[Permutation] | None = None
) -> float:
    """``ln Z``; raises ``InvariantViolation`` if the contracted sum is not positive."""
    res = contract_signed(model, boundary)
    if res.sign <= 0:
        raise InvariantViolation(f"partition function is not positive (sign {res.sign})")
    return res.log_abs


def log_ratio(model: LatticeModel, boundary: BoundaryConfig) -> float:
    """``ln(Z_A / Z_0)`` with ``Z_0`` the uniform-identity top boundary."""
    return contract(model, boundary) - contract(model, boundary.uniform(model.width))


def purity_ratio(d: int, t: int, width: int | None = None) -> float:
    """Contracted ``Z_A / Z_0`` for a half chain at ``Q=2, p=0``.

    The default width ``4t + 4`` keeps the domain wall clear of both edges.
    """
    width = 4 * t + 4 if width is None else width
    model = LatticeModel(2, d, width, t)
    return math.exp(log_ratio(model, BoundaryConfig(tuple(range(width // 2)))))


def rtn_ising_log_ratio(d: int, width: int, depth: int, region: Sequence[int]) -> float:
    """``ln(Z_A / Z_0)`` of the two-replica random tensor network on the brickwork."""
    region = tuple(region)
    if not region:
        return 0.0
    model = LatticeModel(2, d, width, depth, lattice_kind="square")
    return log_ratio(model, BoundaryConfig(region))


# --- Potts model and FK clusters ---------------------------------------------


@dataclass(frozen=True)
class Lattice:
    """Undirected graph of Potts spins."""

    num_sites: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        for a, b in edges:
            if not (0 <= a < self.num_sites and 0 <= b < self.num_sites) or a == b:
                raise ValueError(f"bad edge {(a, b)}")
        object.__setattr__(self, "edges", edges)


def square_lattice(rows: int, cols: int) -> Lattice:
    """Open ``rows x cols`` grid."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return Lattice(rows * cols, tuple(edges))


def circuit_potts_lattice(width: int, depth: int) -> Lattice:
    """Infinite-``d`` lattice of a brickwork circuit: one site per gate, one
    bond to each gate feeding its input legs."""
    ids = {}
    edges = []
    last = [None] * width
    for layer in range(2 * depth):
        for x in range(layer % 2, width - 1, 2):
            node = ids.setdefault((layer, x), len(ids))
            for w in (x, x + 1):
                if last[w] is not None and last[w] != node:
                    edges.append((last[w], node))
            last[x] = last[x + 1] = node
    # an edge wire may feed the same gate pair twice; keep both bonds
    return Lattice(len(ids), tuple(edges))


@numba.njit(cache=True)
def _fk_histogram(n, ea, eb):
    E = ea.shape[0]
    hist = np.zeros((E + 1, n + 1), dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    for mask in range(1 << E):
        for i in range(n):
            parent[i] = i
        occ = 0
        clusters = n
        for e in range(E):
            if (mask >> e) & 1:
                occ += 1
                a = ea[e]
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                b = eb[e]
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a != b:
                    parent[a] = b
                    clusters -= 1
        hist[occ, clusters] += 1
    return hist


def fk_cluster_histogram(lattice: Lattice) -> np.ndarray:
    """Counts ``N[#occupied, #clusters]`` over all ``2^E`` bond subsets."""
    E = len(lattice.edges)
    if E > MAX_FK_LINKS:
        raise ResourceCapError(f"{E} links exceed the exhaustive cap {MAX_FK_LINKS}")
    if E == 0:
        hist = np.zeros((1, lattice.num_sites + 1), dtype=np.int64)
        hist[0, lattice.num_sites] = 1
        return hist
    ea = np.array([a for a, _ in lattice.edges], dtype=np.int64)
    eb = np.array([b for _, b in lattice.edges], dtype=np.int64)
    return _fk_histogram(lattice.num_sites, ea, eb)


def _xlogy(k, y):
    # k * ln y with 0 * ln 0 = 0
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(k == 0, 0.0, k * np.log(y))


def fk_partition_function(
    lattice: Lattice, p: float, Q: int | None = None, cluster_weight: float | None = None
) -> float:
    """``ln sum_clusters p^#empty (1-p)^#occupied w^#clusters`` with ``w = Q!``.

    ``cluster_weight`` overrides ``w`` (any positive real, e.g. 1 for plain
    bond percolation).
    """
    if cluster_weight is None:
        if Q is None:
            raise ValueError("give Q or cluster_weight")
        cluster_weight = math.factorial(Q)
    if cluster_weight <= 0:
        raise ValueError("cluster weight must be positive")
    hist = fk_cluster_histogram(lattice)
    E = len(lattice.edges)
    occ, clus = np.nonzero(hist)
    logs = (
        np.log(hist[occ, clus].astype(float))
        + _xlogy(occ, 1.0 - p)
        + _xlogy(E - occ, p)
        + clus * math.log(cluster_weight)
    )
    return float(logsumexp(logs))


def potts_spin_sum(lattice: Lattice, p: float, Q: int) -> float:
    """``ln`` of the direct sum over ``(Q!)^n`` spin configurations of the
    bond weights ``(1-p) delta + p``."""
    q = math.factorial(Q)
    n = lattice.num_sites
    if q**n > MAX_SPIN_CONFIGS:
        raise ResourceCapError(f"{q}^{n} spin configurations exceed {MAX_SPIN_CONFIGS}")
    E = len(lattice.edges)
    counts = np.zeros(E + 1, dtype=np.int64)
    total = q**n
    chunk = 1 << 18
    for start in range(0, total, chunk):
        codes = np.arange(start, min(total, start + chunk))
        spins = np.empty((n, codes.size), dtype=np.int64)
        for i in range(n - 1, -1, -1):
            spins[i] = codes % q
            codes = codes // q
        unequal = np.zeros(spins.shape[1], dtype=np.int64)
        for a, b in lattice.edges:
            unequal += spins[a] != spins[b]
        counts += np.bincount(unequal, minlength=E + 1)
    k = np.nonzero(counts)[0]
    return float(logsumexp(np.log(counts[k].astype(float)) + _xlogy(k, p)))
