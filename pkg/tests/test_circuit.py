import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from monitorlab import circuit, qstate
from monitorlab.circuit import CircuitSpec
from monitorlab.errors import ResourceCapError
from monitorlab.haar import RandomStream

LN2 = math.log(2)


def zeros(L, d=2):
    return qstate.product_state(L, d, [0] * L)


def test_layer_geometry():
    assert list(circuit.layer_gate_sites(5, 0)) == [0, 2]
    assert list(circuit.layer_gate_sites(5, 1)) == [1, 3]
    assert list(circuit.layer_gate_sites(1, 0)) == []
    spec = CircuitSpec(4, 2, 3)
    assert spec.num_layers == 6 and [len(g) for g in spec.gates] == [2, 1] * 3


def test_spec_validation():
    with pytest.raises(ValueError):
        CircuitSpec(4, 2, 1, p=1.5)
    with pytest.raises(ValueError):
        CircuitSpec(4, 1, 1)
    with pytest.raises(ValueError):
        CircuitSpec(4, 2, 1, layout=((2, 0),))


def test_p0_has_no_record_and_p1_measures_everything():
    res = circuit.run_trajectory(CircuitSpec(4, 2, 2), zeros(4), np.random.default_rng(0))
    assert res.record.events == () and res.log_born == 0.0
    spec = CircuitSpec(4, 2, 1, p=1.0)
    res = circuit.run_trajectory(spec, zeros(4), np.random.default_rng(0))
    assert len(res.record.events) == 8
    assert [(k, x) for k, x, _ in res.record.events] == [(k, x) for k in (0, 1) for x in range(4)]


def test_determinism():
    spec = CircuitSpec(5, 2, 3, p=0.3, gate_seed=RandomStream(1), meas_seed=RandomStream(2))
    a = circuit.run_trajectory(spec, zeros(5), RandomStream(3))
    b = circuit.run_trajectory(spec, zeros(5), RandomStream(3))
    assert a.record == b.record and np.array_equal(a.final_state.amplitudes, b.final_state.amplitudes)
    real = CircuitSpec(5, 2, 3, p=0.3).realization(RandomStream(9, 1))
    assert real.measurement_layout == CircuitSpec(5, 2, 3, p=0.3).realization(
        RandomStream(9, 1)
    ).measurement_layout


def test_replay_reproduces_trajectory_and_born_weight():
    spec = CircuitSpec(4, 3, 2, p=0.4, gate_seed=RandomStream(4), meas_seed=RandomStream(5))
    res = circuit.run_trajectory(spec, zeros(4, 3), np.random.default_rng(6))
    rep = circuit.replay_outcomes(spec, zeros(4, 3), res.record.outcomes)
    assert rep.log_weight == pytest.approx(res.log_born, abs=1e-12)
    assert abs(abs(np.vdot(rep.amplitudes, res.final_state.amplitudes)) - 1) < 1e-12
    with pytest.raises(ValueError):
        circuit.replay_outcomes(spec, zeros(4, 3), res.record.outcomes + (0,))


def test_branch_probabilities_sum_to_one():
    lay = ((0, 1), (1, 0), (1, 2), (2, 3), (3, 1))
    spec = CircuitSpec(4, 2, 2, layout=lay, gate_seed=RandomStream(11))
    branches = circuit.enumerate_branches(spec, zeros(4))
    assert len(branches) == 32
    assert sum(b.born_prob for b in branches) == pytest.approx(1.0, abs=1e-12)
    big = CircuitSpec(4, 2, 2, p=1.0)
    with pytest.raises(ResourceCapError):
        circuit.enumerate_branches(big, zeros(4))


def test_branch_states_match_replay():
    lay = ((0, 0), (1, 2), (2, 1))
    spec = CircuitSpec(3, 2, 2, layout=lay, gate_seed=RandomStream(8))
    for b in circuit.enumerate_branches(spec, zeros(3)):
        rep = circuit.replay_outcomes(spec, zeros(3), b.outcomes)
        assert math.exp(rep.log_weight) == pytest.approx(b.born_prob, abs=1e-12)


def test_sampled_outcome_frequencies_follow_born_rule():
    lay = ((0, 0), (1, 1), (3, 2))
    spec = CircuitSpec(3, 2, 2, layout=lay, gate_seed=RandomStream(21))
    branches = circuit.enumerate_branches(spec, zeros(3))
    probs = np.array([b.born_prob for b in branches])
    index = {b.outcomes: i for i, b in enumerate(branches)}
    rng = np.random.default_rng(0)
    n = 20000
    counts = np.zeros(len(branches))
    for _ in range(n):
        counts[index[circuit.run_trajectory(spec, zeros(3), rng).record.outcomes]] += 1
    keep = probs > 0
    _, pval = stats.chisquare(counts[keep], n * probs[keep] / probs[keep].sum())
    assert pval > 1e-3


def test_light_cone_geometry():
    cone = circuit.backward_light_cone(8, 2, 4)
    assert cone == {(1, 3), (0, 2), (0, 4)}
    assert circuit.backward_light_cone(8, 0, 4) == set()


def test_light_cone_pruning_matches_full_simulation():
    L, t, cut = 8, 2, 4
    stream = RandomStream(3)
    est = circuit.purity_growth_estimator(L, 2, t, 1, cut, stream)
    spec = CircuitSpec(L, 2, t).realization(stream.child(0))
    full = []
    circuit.run_trajectory(
        spec, zeros(L), np.random.default_rng(0),
        observe=lambda _, s: full.append(qstate.purity(s, range(cut))),
    )
    assert np.allclose(est.mean, full, atol=1e-12)
    with pytest.raises(ValueError):
        circuit.purity_growth_estimator(L, 2, t, 1, 0, stream)


def test_p1_gives_zero_entropy():
    spec = CircuitSpec(6, 2, 2, p=1.0)
    est = circuit.entanglement_growth_curve(spec, range(3), 2, 5, RandomStream(0))
    assert np.all(np.abs(est.mean) < 1e-10)


def test_ancilla_initial_state_and_endpoints():
    s = circuit.ancilla_initial_state(4, 2, np.random.default_rng(0))
    assert s.num_sites == 5
    assert qstate.renyi_entropy(s, [4], "vonNeumann") == pytest.approx(LN2, abs=1e-12)
    p0 = circuit.ancilla_probe_curve(CircuitSpec(4, 2, 3, p=0.0), 4, RandomStream(1))
    assert np.allclose(p0.mean, LN2, atol=1e-10)
    # measuring every site of a product pair reveals the label after one layer
    p1 = circuit.ancilla_probe_curve(CircuitSpec(4, 2, 2, p=1.0), 4, RandomStream(2), "product")
    assert p1.mean[0] == pytest.approx(LN2, abs=1e-12)
    assert np.all(np.abs(p1.mean[1:]) < 1e-10)


@settings(max_examples=25, deadline=None)
@given(
    L=st.integers(2, 5),
    depth=st.integers(0, 3),
    p=st.floats(0, 1),
    seed=st.integers(0, 2**31),
)
def test_trajectory_stays_normalized(L, depth, p, seed):
    spec = CircuitSpec(L, 2, depth, p, RandomStream(seed, 0), RandomStream(seed, 1))
    norms = []
    res = circuit.run_trajectory(
        spec, zeros(L), RandomStream(seed, 2), observe=lambda _, s: norms.append(s.norm())
    )
    assert len(norms) == depth + 1 and np.allclose(norms, 1, atol=1e-10)
    assert res.log_born <= 1e-12
    assert len(res.record.events) == len(spec.measurement_layout)
