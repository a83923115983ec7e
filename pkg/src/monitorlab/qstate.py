"""Dense state vectors for chains of qudits.

Site 0 is the most significant digit of the basis index. Amplitudes are kept
unit-normalized; the natural log of the Born probability accumulated by
projective measurements lives in ``log_weight``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceCapError

DEFAULT_MAX_DIM = 4096
EIG_CUTOFF = 1e-14
DEAD_BRANCH_PROB = 1e-300


@dataclass
class QuditState:
    amplitudes: np.ndarray
    local_dim: int
    num_sites: int
    log_weight: float = 0.0

    def __post_init__(self):
        if self.local_dim < 2:
            raise ValueError("local_dim must be >= 2")
        if self.num_sites < 1:
            raise ValueError("num_sites must be >= 1")
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.local_dim**self.num_sites,):
            raise ValueError(
                f"amplitude vector must have length {self.local_dim}**{self.num_sites}"
            )
        if self.log_weight > 0:
            raise ValueError("log_weight must be <= 0")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def is_dead(self) -> bool:
        """True for a branch whose imposed outcome had vanishing probability."""
        return self.log_weight == -math.inf

    @property
    def born_probability(self) -> float:
        return math.exp(self.log_weight)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.local_dim,) * self.num_sites)

    def copy(self) -> QuditState:
        return replace(self, amplitudes=self.amplitudes.copy())


def check_region(region: Iterable[int], num_sites: int) -> tuple[int, ...]:
    """Validate a subsystem: strictly increasing site indices below ``num_sites``."""
    sites = tuple(int(x) for x in region)
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise ValueError(f"region sites must be strictly increasing, got {sites}")
    if sites and (sites[0] < 0 or sites[-1] >= num_sites):
        raise ValueError(f"region {sites} out of range for {num_sites} sites")
    return sites


def product_state(num_sites: int, local_dim: int, basis: Sequence[int]) -> QuditState:
    """Computational-basis product state ``|basis[0] basis[1] ...>``."""
    if len(basis) != num_sites:
        raise ValueError("need one basis index per site")
    index = 0
    for b in basis:
        if not 0 <= b < local_dim:
            raise ValueError(f"basis index {b} outside [0, {local_dim})")
        index = index * local_dim + int(b)
    amps = np.zeros(local_dim**num_sites, dtype=np.complex128)
    amps[index] = 1.0
    return QuditState(amps, local_dim, num_sites)


def from_amplitudes(amplitudes, local_dim: int, num_sites: int) -> QuditState:
    """Wrap a vector as a state, normalizing it."""
    amps = np.asarray(amplitudes, dtype=np.complex128)
    nrm = np.linalg.norm(amps)
    if nrm == 0:
        raise ValueError("zero vector")
    return QuditState(amps / nrm, local_dim, num_sites)


def is_unitary(matrix: np.ndarray, atol: float = 1e-10) -> bool:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=atol)


def apply_two_site_gate(
    state: QuditState, gate: np.ndarray, left_site: int, check: bool = True
) -> QuditState:
    """Apply a ``d^2 x d^2`` unitary on sites ``(left_site, left_site + 1)``.

    The amplitude vector is viewed as ``(d**left, d*d, d**right)`` and the gate
    is applied as a batched matrix product, so the full operator is never built.
    """
    d, n = state.local_dim, state.num_sites
    if not 0 <= left_site < n - 1:
        raise ValueError(f"left_site {left_site} out of range for {n} sites")
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (d * d, d * d):
        raise ValueError(f"gate must be {d * d}x{d * d}")
    if check and not is_unitary(gate):
        raise ValueError("gate is not unitary")
    view = state.amplitudes.reshape(d**left_site, d * d, -1)
    out = np.matmul(gate, view).reshape(-1)
    return replace(state, amplitudes=out)


def outcome_probabilities(state: QuditState, site: int) -> np.ndarray:
    """Born probabilities of the ``d`` computational-basis outcomes on ``site``."""
    d, n = state.local_dim, state.num_sites
    if not 0 <= site < n:
        raise ValueError(f"site {site} out of range")
    view = state.amplitudes.reshape(d**site, d, -1)
    probs = np.einsum("aib,aib->i", view, view.conj()).real
    return probs


def _project(state: QuditState, site: int, outcome: int, prob: float) -> QuditState:
    d = state.local_dim
    view = state.amplitudes.reshape(d**site, d, -1)
    out = np.zeros_like(view)
    out[:, outcome, :] = view[:, outcome, :] / math.sqrt(prob)
    log_weight = min(0.0, state.log_weight + math.log(prob))
    return replace(state, amplitudes=out.reshape(-1), log_weight=log_weight)


def measure_site(
    state: QuditState, site: int, rng: np.random.Generator
) -> tuple[int, QuditState]:
    """Projective computational-basis measurement with a Born-sampled outcome."""
    probs = outcome_probabilities(state, site)
    total = probs.sum()
    if not total > DEAD_BRANCH_PROB:
        raise ValueError("all outcome probabilities vanish; state is corrupted")
    cdf = np.cumsum(probs)
    outcome = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    outcome = min(outcome, int(np.flatnonzero(probs)[-1]))
    return outcome, _project(state, site, outcome, float(probs[outcome] / total))


def measure_site_forced(state: QuditState, site: int, outcome: int) -> QuditState:
    """Project onto a given outcome; a vanishing branch comes back dead.

    A dead branch has ``log_weight == -inf`` and a zero amplitude vector.
    """
    if not 0 <= outcome < state.local_dim:
        raise ValueError(f"outcome {outcome} outside [0, {state.local_dim})")
    if state.is_dead:
        return state.copy()
    prob = float(outcome_probabilities(state, site)[outcome])
    if prob < DEAD_BRANCH_PROB:
        return replace(
            state, amplitudes=np.zeros_like(state.amplitudes), log_weight=-math.inf
        )
    return _project(state, site, outcome, prob)


def _bipartition(state: QuditState, region: Sequence[int]) -> np.ndarray:
    """Amplitudes as a ``d^|A| x d^|complement|`` matrix."""
    sites = check_region(region, state.num_sites)
    rest = [x for x in range(state.num_sites) if x not in sites]
    d = state.local_dim
    psi = state.tensor().transpose(list(sites) + rest)
    return psi.reshape(d ** len(sites), d ** len(rest))


def reduced_density_matrix(
    state: QuditState, region: Sequence[int], max_dim: int = DEFAULT_MAX_DIM
) -> np.ndarray:
    """``rho_A = tr_{complement} |psi><psi|`` as a dense Hermitian matrix."""
    sites = check_region(region, state.num_sites)
    if state.local_dim ** len(sites) > max_dim:
        raise ResourceCapError(
            f"region of {len(sites)} sites exceeds reduced-matrix cap {max_dim}"
        )
    m = _bipartition(state, sites)
    rho = m @ m.conj().T
    return 0.5 * (rho + rho.conj().T)


def _gram_smaller_side(state: QuditState, region, max_dim: int) -> np.ndarray:
    m = _bipartition(state, region)
    if min(m.shape) > max_dim:
        raise ResourceCapError(
            f"both sides of the bipartition exceed the cap {max_dim}"
        )
    g = m @ m.conj().T if m.shape[0] <= m.shape[1] else m.conj().T @ m
    return 0.5 * (g + g.conj().T)


def entanglement_spectrum(
    state: QuditState, region: Sequence[int], max_dim: int = DEFAULT_MAX_DIM
) -> np.ndarray:
    """Nonzero-clamped eigenvalues of ``rho_A`` (computed on the smaller side)."""
    evals = np.linalg.eigvalsh(_gram_smaller_side(state, region, max_dim))
    evals = np.where(evals < EIG_CUTOFF, 0.0, evals)
    return evals / evals.sum()


def spectrum_entropy(evals: np.ndarray, n) -> float:
    """Renyi entropy (nats) of a probability spectrum; ``n`` may be "vonNeumann"."""
    p = evals[evals > 0]
    if isinstance(n, str):
        if n.lower() not in ("vonneumann", "vn"):
            raise ValueError(f"unknown entropy index {n!r}")
        n = 1
    if n < 0:
        raise ValueError("Renyi index must be >= 0")
    if n == 1:
        return float(-np.sum(p * np.log(p)))
    if n == 0:
        return math.log(p.size)
    if math.isinf(n):
        return float(-math.log(p.max()))
    return float(math.log(np.sum(p**n)) / (1.0 - n))


def renyi_entropy(
    state: QuditState, region: Sequence[int], n=2, max_dim: int = DEFAULT_MAX_DIM
) -> float:
    """``S^(n)_A = ln(tr rho_A^n) / (1 - n)`` in nats; n=1 or "vonNeumann" gives S_vN."""
    if len(check_region(region, state.num_sites)) == 0:
        return 0.0
    return spectrum_entropy(entanglement_spectrum(state, region, max_dim), n)


def purity(state: QuditState, region: Sequence[int], max_dim: int = DEFAULT_MAX_DIM) -> float:
    """``tr rho_A^2``."""
    if len(check_region(region, state.num_sites)) == 0:
        return 1.0
    g = _gram_smaller_side(state, region, max_dim)
    tr = np.trace(g).real
    return float(np.vdot(g, g).real / tr**2)
