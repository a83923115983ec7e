"""Minimal cuts through brickwork circuits diluted by measurements.

The cut is found as a shortest path in the planar dual. Dual vertices are the
faces ``(g, s)`` between wires ``g - 1`` and ``g`` in time slice ``s`` (slice
``s`` sits between layers ``s - 1`` and ``s``; slice 0 is below every gate and
slice ``2T`` above), plus the LEFT and RIGHT outer faces. Moving up or down
inside a gap is free unless a gate sits on that gap; moving sideways crosses
one leg of a wire and costs its capacity: 1, or 0 if the leg is measured.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .circuit import CircuitSpec
from .haar import RandomStream, as_generator
from .sampling import map_samples


@dataclass(frozen=True)
class Leg:
    wire: int
    start: int  # layer of the lower node, -1 for the initial state
    stop: int  # layer of the upper node, num_layers for the top boundary
    measured: bool
    capacity: int


@dataclass(frozen=True)
class CutGraph:
    """Circuit tensor network as legs with measured flags.

    ``bottom="free"`` treats the product initial state as carrying no
    entanglement (initial-state legs have capacity 0, so cuts may leave
    through the bottom); ``bottom="pinned"`` gives them capacity 1, as for a
    system maximally entangled with a reference.
    """

    L: int
    depth: int
    measured: np.ndarray
    bottom: str = "free"

    def __post_init__(self):
        if self.bottom not in ("free", "pinned"):
            raise ValueError("bottom must be 'free' or 'pinned'")
        m = np.asarray(self.measured, dtype=bool)
        if m.shape != (self.num_layers, self.L):
            raise ValueError("measured mask must have shape (2*depth, L)")
        object.__setattr__(self, "measured", m)

    @property
    def num_layers(self) -> int:
        return 2 * self.depth

    def legs(self) -> list[Leg]:
        touched = self.touched()
        out = []
        for w in range(self.L):
            nodes = [-1, *np.flatnonzero(touched[:, w]), self.num_layers]
            for a, b in zip(nodes, nodes[1:]):
                meas = bool(self.measured[max(a, 0) : b, w].any())
                if a == -1 and self.bottom == "free":
                    cap = 0
                else:
                    cap = 0 if meas else 1
                out.append(Leg(w, a, b, meas, cap))
        return out

    def touched(self) -> np.ndarray:
        """``touched[k, w]``: wire ``w`` enters a gate in layer ``k``."""
        return _touched(self.L, self.num_layers)

    def slice_capacity(self) -> np.ndarray:
        """``cap[s, w]``: cost of crossing wire ``w`` inside slice ``s``."""
        L, S = self.L, self.num_layers + 1
        # legid[s, w]: how many gates wire w has passed below slice s
        legid = np.zeros((S, L), dtype=np.int64)
        legid[1:] = np.cumsum(self.touched(), axis=0)
        hit = np.zeros((S, L), dtype=bool)
        hit[1:] = self.measured
        key = legid * L + np.arange(L)
        leg_hit = np.bincount(key.ravel(), weights=hit.ravel(), minlength=key.max() + 1) > 0
        cap = (~leg_hit[key]).astype(np.int64)
        if self.bottom == "free":
            cap[legid == 0] = 0
        return cap


def _touched(L: int, num_layers: int) -> np.ndarray:
    k = np.arange(num_layers)[:, None]
    w = np.arange(L)[None, :]
    as_left = (w % 2 == k % 2) & (w <= L - 2)
    as_right = (w >= 1) & ((w - 1) % 2 == k % 2)
    return as_left | as_right


def build_cut_graph(
    spec: CircuitSpec, positions: Sequence[tuple[int, int]] | None = None, bottom: str = "free"
) -> CutGraph:
    """Cut graph of ``spec``; ``positions`` overrides its measurement layout."""
    if positions is None:
        mask = spec.measured_mask()
    else:
        mask = np.zeros((spec.num_layers, spec.L), dtype=bool)
        for k, x in positions:
            mask[k, x] = True
    return CutGraph(spec.L, spec.depth, mask, bottom)


def _dual_graph(graph: CutGraph):
    """Dual edges as arrays ``(rows, cols, weights)`` and the vertex map."""
    L, S = graph.L, graph.num_layers + 1
    cap = graph.slice_capacity()
    left, right = (L - 1) * S, (L - 1) * S + 1

    def vid(g: int, s: int) -> int:
        if g == 0:
            return left
        if g == L:
            return right
        return (g - 1) * S + s

    g, sl = np.meshgrid(np.arange(1, L), np.arange(S - 1), indexing="ij")
    open_ = (g - 1) % 2 != sl % 2
    rows = [((g - 1) * S + sl)[open_]]
    cols = [((g - 1) * S + sl + 1)[open_]]
    wts = [np.zeros(open_.sum(), dtype=np.int64)]
    w, sl = np.meshgrid(np.arange(L), np.arange(S), indexing="ij")
    lhs = np.where(w == 0, left, (w - 1) * S + sl)
    rhs = np.where(w + 1 == L, right, w * S + sl)
    rows.append(lhs.ravel())
    cols.append(rhs.ravel())
    wts.append(cap.T.ravel())
    if graph.bottom == "free":
        # the bottom joins both sides into a single outer face
        rows.append([left])
        cols.append([right])
        wts.append([0])
    rows, cols, wts = (np.concatenate(x) for x in (rows, cols, wts))
    return rows, cols, wts, vid, (L - 1) * S + 2


def minimal_cut(graph: CutGraph, region: Sequence[int]) -> int:
    """Fewest unmeasured legs whose removal separates the top legs of ``region``.

    ``region`` must be contiguous. With a free bottom the two ends of the cut
    may leave through the sides or the bottom; with a pinned bottom the cut
    either closes on itself or both ends exit through the same side.
    """
    region = sorted(int(x) for x in region)
    if not region:
        return 0
    if region != list(range(region[0], region[-1] + 1)) or region[-1] >= graph.L:
        raise ValueError("region must be a contiguous range of sites")
    rows, cols, wts, vid, n = _dual_graph(graph)

    # merge faces joined by free moves, then unit-weight BFS on the quotient
    zero = wts == 0
    adj0 = sparse.coo_matrix((np.ones(zero.sum()), (rows[zero], cols[zero])), shape=(n, n))
    _, comp = csgraph.connected_components(adj0, directed=False)
    nc = comp.max() + 1
    one = ~zero
    adj1 = sparse.coo_matrix(
        (np.ones(one.sum()), (comp[rows[one]], comp[cols[one]])), shape=(nc, nc)
    ).tocsr()
    top = graph.num_layers
    a, b = comp[vid(region[0], top)], comp[vid(region[-1] + 1, top)]
    da, db = csgraph.shortest_path(adj1, directed=False, unweighted=True, indices=[a, b])
    cl, cr = comp[vid(0, 0)], comp[vid(graph.L, 0)]
    best = min(da[b], da[cl] + db[cl], da[cr] + db[cr])
    return int(best)


def percolation_entropy(ell: int, d: int) -> float:
    """Entropy ``ell ln d`` of a cut crossing ``ell`` unmeasured legs (nats, any index)."""
    return ell * math.log(d)


# --- percolation scans -------------------------------------------------------


def random_layout(L: int, depth: int, p: float, rng) -> np.ndarray:
    """Bernoulli(p) measured mask of shape ``(2 depth, L)``."""
    return as_generator(rng).random((2 * depth, L)) < p


def _cut_samples(args):
    L, depth, p, region, bottom, count, stream = args
    rng = stream.generator()
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        g = CutGraph(L, depth, random_layout(L, depth, p, rng), bottom)
        out[i] = minimal_cut(g, region)
    return out


def sample_cuts(
    L: int,
    depth: int,
    p: float,
    region: Sequence[int],
    num_samples: int,
    rng: RandomStream,
    bottom: str = "free",
    workers: int = 1,
) -> np.ndarray:
    """Minimal cuts over independent random measurement layouts."""
    region = tuple(region)
    chunk = 250
    args = [
        (L, depth, p, region, bottom, min(chunk, num_samples - i), rng.child(i // chunk))
        for i in range(0, num_samples, chunk)
    ]
    return np.concatenate(map_samples(_cut_samples, args, workers)) if args else np.array([])


def volume_law_scan(
    sizes: Sequence[int], p: float, num_samples: int, rng: RandomStream, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of ``ell_DW`` for ``A = [0, L_A)``.

    The chain has ``2 L_A`` sites and ``L_A`` time steps with a free bottom.
    """
    means, errs = [], []
    for j, la in enumerate(sizes):
        cuts = sample_cuts(2 * la, la, p, range(la), num_samples, rng.child(j), workers=workers)
        means.append(cuts.mean())
        errs.append(cuts.std(ddof=1) / math.sqrt(len(cuts)))
    return np.array(means), np.array(errs)


@dataclass
class PcEstimate:
    p_c: float
    ci_low: float
    ci_high: float
    sizes: np.ndarray
    p_grid: np.ndarray
    mean_cut: np.ndarray  # (len(sizes), len(p_grid)), purification geometry
    mean_cut_stderr: np.ndarray
    prob_zero: np.ndarray  # P(ell_DW = 0), same shape
    num_samples: int


def _crossing(p_grid: np.ndarray, f1: np.ndarray, f2: np.ndarray) -> float:
    """Linear-interpolated sign change of ``f2 - f1`` (nan if none).

    Grid points where the curves tie (both saturated at 0 or 1) are skipped;
    among several sign changes the steepest one wins.
    """
    diff = np.asarray(f2, dtype=float) - np.asarray(f1, dtype=float)
    nz = np.flatnonzero(diff)
    best, steep = math.nan, -1.0
    for i, j in zip(nz, nz[1:]):
        if diff[i] * diff[j] < 0:
            t = diff[i] / (diff[i] - diff[j])
            slope = abs(diff[j] - diff[i]) / (p_grid[j] - p_grid[i])
            if slope > steep:
                best = float(p_grid[i] + t * (p_grid[j] - p_grid[i]))
                steep = slope
    return best


def _pc_from_curves(p_grid, curves) -> float:
    xs = [_crossing(p_grid, curves[i], curves[i + 1]) for i in range(len(curves) - 1)]
    xs = [x for x in xs if math.isfinite(x)]
    return float(np.mean(xs)) if xs else math.nan


def estimate_pc(
    sizes: Sequence[int],
    p_grid: Sequence[float],
    num_samples: int,
    rng: RandomStream,
    num_bootstrap: int = 500,
    workers: int = 1,
) -> PcEstimate:
    """Finite-size crossing of ``P(ell_DW = 0)`` in the purification geometry.

    For each ``L`` the whole chain is the region, the bottom is pinned and the
    circuit has ``L`` layers, so the percolating cluster must span a square
    block. Below ``p_c`` the cut grows with ``L`` and ``P(ell = 0)`` falls; above
    it rises. Crossings of consecutive sizes are averaged; the interval comes
    from a parametric bootstrap of every point's binomial count.
    """
    sizes = np.asarray(sizes, dtype=int)
    p_grid = np.asarray(p_grid, dtype=float)
    mean_cut = np.empty((len(sizes), len(p_grid)))
    cut_err = np.empty_like(mean_cut)
    zeros = np.empty((len(sizes), len(p_grid)), dtype=np.int64)
    for i, L in enumerate(sizes):
        for j, p in enumerate(p_grid):
            cuts = sample_cuts(
                int(L), max(1, int(L) // 2), float(p), range(int(L)), num_samples,
                rng.child(i, j), bottom="pinned", workers=workers,
            )
            mean_cut[i, j] = cuts.mean()
            cut_err[i, j] = cuts.std(ddof=1) / math.sqrt(len(cuts)) if len(cuts) > 1 else math.nan
            zeros[i, j] = np.count_nonzero(cuts == 0)
    prob = zeros / num_samples
    p_c = _pc_from_curves(p_grid, prob)
    boot_rng = rng.child(len(sizes), 0).generator()
    boots = []
    for _ in range(num_bootstrap):
        resampled = boot_rng.binomial(num_samples, prob) / num_samples
        x = _pc_from_curves(p_grid, resampled)
        if math.isfinite(x):
            boots.append(x)
    lo, hi = (np.percentile(boots, [2.5, 97.5]) if boots else (math.nan, math.nan))
    return PcEstimate(
        p_c, float(lo), float(hi), sizes, p_grid, mean_cut, cut_err, prob, num_samples
    )
