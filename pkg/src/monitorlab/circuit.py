"""Brickwork monitored circuits: trajectories, branch sums and probes.

Geometry: one time step is an even layer (gates on (0,1), (2,3), ...)
followed by an odd layer (gates on (1,2), (3,4), ...); the chain is open, so
edge sites idle on alternate layers. After every layer each site is measured
in the computational basis with probability ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import qstate
from .errors import ResourceCapError
from .haar import RandomStream, sample_haar_unitary, sample_orthogonal_haar_pair
from .qstate import QuditState
from .sampling import jackknife_stderr, map_samples, mean_stderr

MAX_ENUMERATED_MEASUREMENTS = 12

# sub-stream tags inside one sample's address
GATES, POSITIONS, OUTCOMES, STATES, COINS = 0, 1, 2, 3, 4


def layer_gate_sites(L: int, layer: int) -> range:
    """Left sites of the gates in ``layer`` (even layers start at 0, odd at 1)."""
    return range(layer % 2, L - 1, 2)


@dataclass(frozen=True)
class CircuitSpec:
    """One circuit realization: geometry, gate stream and measurement layout.

    ``layout`` freezes the measurement positions as ``(layer, site)`` pairs;
    when it is ``None`` positions are Bernoulli(p) draws from ``meas_seed``.
    """

    L: int
    d: int
    depth: int
    p: float = 0.0
    gate_seed: RandomStream = field(default_factory=lambda: RandomStream(0, 0, (GATES,)))
    meas_seed: RandomStream = field(
        default_factory=lambda: RandomStream(0, 0, (POSITIONS,))
    )
    layout: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.L < 1 or self.d < 2 or self.depth < 0:
            raise ValueError("need L >= 1, d >= 2, depth >= 0")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("measurement rate p must lie in [0, 1]")
        if self.layout is not None:
            lay = tuple(sorted((int(a), int(b)) for a, b in self.layout))
            for layer, site in lay:
                if not (0 <= layer < self.num_layers and 0 <= site < self.L):
                    raise ValueError(f"measurement position {(layer, site)} out of range")
            object.__setattr__(self, "layout", lay)

    @property
    def num_layers(self) -> int:
        return 2 * self.depth

    @cached_property
    def gates(self) -> tuple[tuple[tuple[int, np.ndarray], ...], ...]:
        """Per layer, the ``(left_site, U)`` pairs drawn from ``gate_seed``."""
        rng = self.gate_seed.generator()
        D = self.d * self.d
        return tuple(
            tuple((x, sample_haar_unitary(D, rng)) for x in layer_gate_sites(self.L, k))
            for k in range(self.num_layers)
        )

    @cached_property
    def measurement_layout(self) -> tuple[tuple[int, int], ...]:
        if self.layout is not None:
            return self.layout
        if self.p == 0.0:
            return ()
        rng = self.meas_seed.generator()
        out = []
        for k in range(self.num_layers):
            hits = np.flatnonzero(rng.random(self.L) < self.p)
            out.extend((k, int(x)) for x in hits)
        return tuple(out)

    def realization(self, stream: RandomStream) -> CircuitSpec:
        """Same geometry and rate with gate/position streams carved from ``stream``."""
        return replace(
            self, gate_seed=stream.child(GATES), meas_seed=stream.child(POSITIONS)
        )

    def measured_mask(self) -> np.ndarray:
        """Boolean ``(num_layers, L)`` array of measurement positions."""
        mask = np.zeros((self.num_layers, self.L), dtype=bool)
        for k, x in self.measurement_layout:
            mask[k, x] = True
        return mask


@dataclass(frozen=True)
class MeasurementRecord:
    events: tuple[tuple[int, int, int], ...]
    layout: tuple[tuple[int, int], ...]

    @property
    def outcomes(self) -> tuple[int, ...]:
        return tuple(m for _, _, m in self.events)


@dataclass
class TrajectoryResult:
    final_state: QuditState
    record: MeasurementRecord
    log_born: float


def _check_initial(spec: CircuitSpec, initial: QuditState):
    # trailing sites beyond spec.L are spectators (e.g. a reference ancilla)
    if initial.local_dim != spec.d or initial.num_sites < spec.L:
        raise ValueError("initial state incompatible with the circuit")


def _ops(spec: CircuitSpec):
    """Flattened schedule: ``('gate', x, U)`` and ``('meas', layer, x)`` items."""
    by_layer: dict[int, list[int]] = {}
    for k, x in spec.measurement_layout:
        by_layer.setdefault(k, []).append(x)
    ops = []
    for k, layer in enumerate(spec.gates):
        ops.extend(("gate", x, u) for x, u in layer)
        ops.extend(("meas", k, x) for x in by_layer.get(k, ()))
        if k % 2 == 1:
            ops.append(("step", k // 2 + 1, None))
    return ops


def run_trajectory(
    spec: CircuitSpec,
    initial: QuditState,
    rng,
    observe: Callable[[int, QuditState], None] | None = None,
) -> TrajectoryResult:
    """Evolve ``initial`` through the circuit with Born-sampled outcomes.

    ``observe(t, state)`` is called at ``t = 0`` and after every full time step.
    """
    _check_initial(spec, initial)
    if isinstance(rng, RandomStream):
        rng = rng.generator()
    state = initial
    events = []
    if observe is not None:
        observe(0, state)
    for kind, a, b in _ops(spec):
        if kind == "gate":
            state = qstate.apply_two_site_gate(state, b, a, check=False)
        elif kind == "meas":
            outcome, state = qstate.measure_site(state, b, rng)
            events.append((a, b, outcome))
        elif observe is not None:
            observe(a, state)
    record = MeasurementRecord(tuple(events), spec.measurement_layout)
    return TrajectoryResult(state, record, state.log_weight - initial.log_weight)


def replay_outcomes(
    spec: CircuitSpec, initial: QuditState, outcomes: Sequence[int]
) -> QuditState:
    """Evolve ``initial`` imposing a recorded outcome string (may end dead)."""
    _check_initial(spec, initial)
    outcomes = list(outcomes)
    if len(outcomes) != len(spec.measurement_layout):
        raise ValueError("outcome string does not match the measurement layout")
    state = initial
    it = iter(outcomes)
    for kind, a, b in _ops(spec):
        if kind == "gate":
            state = qstate.apply_two_site_gate(state, b, a, check=False)
        elif kind == "meas":
            state = qstate.measure_site_forced(state, b, next(it))
            if state.is_dead:
                return state
    return state


@dataclass
class Branch:
    outcomes: tuple[int, ...]
    born_prob: float
    final_state: QuditState


def enumerate_branches(spec: CircuitSpec, initial: QuditState) -> list[Branch]:
    """Every outcome string of the frozen circuit with its Born probability."""
    _check_initial(spec, initial)
    n_meas = len(spec.measurement_layout)
    if n_meas > MAX_ENUMERATED_MEASUREMENTS:
        raise ResourceCapError(
            f"{n_meas} measurements exceed the branch cap {MAX_ENUMERATED_MEASUREMENTS}"
        )
    ops = _ops(spec)
    out: list[Branch] = []

    def walk(i: int, state: QuditState, prefix: tuple[int, ...]):
        while i < len(ops) and ops[i][0] != "meas":
            if ops[i][0] == "gate" and not state.is_dead:
                state = qstate.apply_two_site_gate(state, ops[i][2], ops[i][1], check=False)
            i += 1
        if i == len(ops):
            prob = math.exp(state.log_weight - initial.log_weight)
            out.append(Branch(prefix, prob, state))
            return
        site = ops[i][2]
        for m in range(spec.d):
            walk(i + 1, qstate.measure_site_forced(state, site, m), prefix + (m,))

    walk(0, initial, ())
    return out


# --- light cones -------------------------------------------------------------


def backward_light_cone(L: int, num_layers: int, cut: int) -> set[tuple[int, int]]:
    """Gates ``(layer, left_site)`` in the causal past of any gate across ``cut``.

    Gates outside this set factor into unitaries acting within one side of the
    cut after the cone, so they leave the entanglement spectrum unchanged.
    """
    cone = set()
    active: set[int] = set()
    for k in reversed(range(num_layers)):
        for x in layer_gate_sites(L, k):
            if x + 1 == cut or x in active or x + 1 in active:
                cone.add((k, x))
        active.update(x for (kk, x) in cone if kk == k)
        active.update(x + 1 for (kk, x) in cone if kk == k)
    return cone


# --- purity growth -----------------------------------------------------------


@dataclass
class CurveEstimate:
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    count: int


def _purity_sample(args):
    L, d, t_max, cut, stream = args
    spec = CircuitSpec(L, d, t_max).realization(stream)
    cone = backward_light_cone(L, spec.num_layers, cut)
    if not cone:
        return np.ones(t_max + 1)
    lo = min(x for _, x in cone)
    hi = max(x for _, x in cone) + 1
    n = hi - lo + 1
    state = qstate.product_state(n, d, [0] * n)
    region = tuple(range(cut - lo))
    values = [1.0]
    for k, layer in enumerate(spec.gates):
        for x, u in layer:
            if (k, x) in cone:
                state = qstate.apply_two_site_gate(state, u, x - lo, check=False)
        if k % 2 == 1:
            values.append(qstate.purity(state, region, max_dim=d**n))
    return np.array(values)


def purity_growth_estimator(
    L: int,
    d: int,
    t_max: int,
    num_samples: int,
    cut_position: int,
    rng: RandomStream,
    workers: int = 1,
) -> CurveEstimate:
    """Haar-circuit average of ``tr rho_A^2(t)`` for ``A = {0..cut-1}`` at p = 0.

    Starts from ``|0...0>``; returns ``t = 0..t_max`` with jackknife errors.
    Only gates in the backward light cone of the cut are simulated.
    """
    if not 0 < cut_position < L:
        raise ValueError("cut must split the chain into two non-empty parts")
    args = [(L, d, t_max, cut_position, rng.child(i)) for i in range(num_samples)]
    values = np.array(map_samples(_purity_sample, args, workers))
    return CurveEstimate(
        np.arange(t_max + 1), values.mean(axis=0), jackknife_stderr(values), num_samples
    )


# --- entanglement growth -----------------------------------------------------


def _entropy_sample(args):
    spec, region, n, stream = args
    real = spec.realization(stream) if spec.layout is None else spec
    values = []
    initial = qstate.product_state(spec.L, spec.d, [0] * spec.L)
    run_trajectory(
        real,
        initial,
        stream.child(OUTCOMES),
        observe=lambda t, s: values.append(qstate.renyi_entropy(s, region, n)),
    )
    return np.array(values)


def entanglement_growth_curve(
    spec: CircuitSpec,
    region: Sequence[int],
    n,
    num_samples: int,
    rng: RandomStream,
    workers: int = 1,
) -> CurveEstimate:
    """Trajectory-averaged ``S^(n)_A(t)`` from ``|0...0>``.

    Each sample draws its own gates, positions and outcomes; trajectory states
    are normalized before the entropy is taken, and Born weighting comes from
    sampling frequency.
    """
    region = qstate.check_region(region, spec.L)
    args = [(spec, region, n, rng.child(i)) for i in range(num_samples)]
    values = np.array(map_samples(_entropy_sample, args, workers))
    mean, err = mean_stderr(values)
    return CurveEstimate(np.arange(spec.depth + 1), mean, err, num_samples)


# --- ancilla probe -----------------------------------------------------------


def ancilla_initial_state(
    L: int, d: int, rng, kind: str = "haar"
) -> QuditState:
    """``(|0>_R |phi> + |1>_R |psi>)/sqrt 2`` with the reference as site ``L``.

    The reference is a qubit embedded in the two lowest levels of an extra
    qudit. ``kind="haar"`` draws an orthogonal Haar pair; ``"product"`` uses
    ``|0...0>`` and ``|1 0...0>``.
    """
    D = d**L
    if kind == "haar":
        phi, psi = sample_orthogonal_haar_pair(D, rng)
    elif kind == "product":
        phi = np.zeros(D, dtype=complex)
        psi = np.zeros(D, dtype=complex)
        phi[0] = 1.0
        psi[d ** (L - 1)] = 1.0
    else:
        raise ValueError(f"unknown initial-state kind {kind!r}")
    amps = np.zeros((D, d), dtype=complex)
    amps[:, 0] = phi / math.sqrt(2)
    amps[:, 1] = psi / math.sqrt(2)
    return QuditState(amps.reshape(-1), d, L + 1)


def ancilla_probe_run(spec: CircuitSpec, rng: RandomStream, kind: str = "haar") -> np.ndarray:
    """Reference-qubit entropy ``S_R(t)`` (von Neumann, nats) for ``t = 0..depth``."""
    initial = ancilla_initial_state(spec.L, spec.d, rng.child(STATES).generator(), kind)
    ref = (spec.L,)
    values = []
    run_trajectory(
        spec,
        initial,
        rng.child(OUTCOMES),
        observe=lambda t, s: values.append(qstate.renyi_entropy(s, ref, "vonNeumann")),
    )
    return np.array(values)


def _ancilla_sample(args):
    spec, kind, stream = args
    return ancilla_probe_run(spec.realization(stream), stream, kind)


def ancilla_probe_curve(
    spec: CircuitSpec,
    num_samples: int,
    rng: RandomStream,
    kind: str = "haar",
    workers: int = 1,
) -> CurveEstimate:
    args = [(spec, kind, rng.child(i)) for i in range(num_samples)]
    values = np.array(map_samples(_ancilla_sample, args, workers))
    mean, err = mean_stderr(values)
    return CurveEstimate(np.arange(spec.depth + 1), mean, err, num_samples)
