"""Exit-criteria suite: one test per criterion, each at its stated tolerance.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from monitorlab import circuit, haar, learn, mincut, qstate, replica, statmech
from monitorlab.circuit import CircuitSpec
from monitorlab.haar import RandomStream

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def criterion(number, title):
    return pytest.mark.criterion(number, title)


@criterion(1, "purity growth at L=20 matches (4/5)^(2t)")
def test_purity_closed_form(record_property):
    est = circuit.purity_growth_estimator(20, 2, 4, 2000, 10, RandomStream(101))
    expected = statmech.purity_closed_form(2, est.t)
    z = np.abs(est.mean[1:] - expected[1:]) / est.stderr[1:]
    record_property("detail", "z-scores " + ", ".join(f"{x:.2f}" for x in z))
    assert est.mean[0] == 1.0
    assert np.all(z < 3)


@criterion(2, "transfer-matrix contraction equals the closed form")
def test_statmech_exactness(record_property):
    worst = 0.0
    for d in (2, 3, 5):
        for t in range(1, 7):
            ratio = statmech.purity_ratio(d, t)
            closed = statmech.purity_closed_form(d, t)
            worst = max(worst, abs(ratio - closed) / closed)
    record_property("detail", f"max relative error {worst:.2e}")
    assert worst < 1e-10


@criterion(3, "Weingarten inversion relation and Q=2 values")
def test_weingarten_identities(record_property):
    worst = 0.0
    for Q in range(1, 5):
        group = replica.symmetric_group(Q)
        for D in range(Q, Q + 8):
            wg = replica.weingarten_table(Q, D).matrix()
            gram = np.array(
                [[float(D) ** replica.cycle_count(g.inverse() * h) for h in group] for g in group]
            )
            worst = max(worst, np.abs(wg @ gram - np.eye(len(group))).max())
    for D in range(2, 12):
        ex = replica.weingarten_exact(2, D)
        assert ex[(1, 1)] == Fraction(1, D * D - 1)
        assert ex[(2,)] == Fraction(-1, D * (D * D - 1))
        tab = replica.weingarten_table(2, D)
        assert tab(replica.Permutation.identity(2)) == pytest.approx(1 / (D * D - 1), rel=1e-14)
    record_property("detail", f"max inversion residual {worst:.1e}")
    assert worst < 1e-10


@criterion(4, "Monte-Carlo (U x U*)^2 mean matches the moment projector")
def test_haar_moment_projector(record_property):
    rng = np.random.default_rng(404)
    n, chunk = 100_000, 10_000
    total = np.zeros((16, 16), dtype=complex)
    sq_re = np.zeros((16, 16))
    sq_im = np.zeros((16, 16))
    for _ in range(n // chunk):
        u = haar.sample_haar_unitaries(2, chunk, rng)
        uc = u.conj()
        m = np.einsum("nab,ncd,nef,ngh->nacegbdfh", u, uc, u, uc).reshape(chunk, 16, 16)
        total += m.sum(axis=0)
        sq_re += (m.real**2).sum(axis=0)
        sq_im += (m.imag**2).sum(axis=0)
    mean = total / n
    se_re = np.sqrt(np.maximum(sq_re / n - mean.real**2, 0) / (n - 1))
    se_im = np.sqrt(np.maximum(sq_im / n - mean.imag**2, 0) / (n - 1))
    proj = replica.haar_moment_projector(2, 2)
    ok = []
    for diff, se in ((mean.real - proj, se_re), (mean.imag, se_im)):
        ok.append(np.where(se > 0, np.abs(diff) <= 4 * se, np.abs(diff) < 1e-12).ravel())
    frac = np.concatenate(ok).mean()
    record_property("detail", f"{100 * frac:.2f}% of 512 real/imag entries within 4 SE")
    assert frac >= 0.99


@criterion(5, "triangle weights 0, 1, d/(1+d^2)")
def test_triangle_table(record_property):
    up, down = replica.symmetric_group(2)
    for d in (2, 3, 5):
        assert statmech.triangle_weight(up, up, down, d, 0.0) == pytest.approx(0, abs=1e-12)
        assert statmech.triangle_weight(up, up, up, d, 0.0) == pytest.approx(1, abs=1e-12)
        assert statmech.triangle_weight(up, down, up, d, 0.0) == pytest.approx(
            d / (1 + d * d), abs=1e-12
        )
    record_property("detail", "d = 2, 3, 5")


@criterion(6, "frozen monitored circuit: branch sum equals fixed-layout contraction")
def test_circuit_statmech_equivalence(record_property):
    layout = ((0, 1), (1, 2), (1, 3), (2, 0), (3, 2))
    region = (0, 1)
    initial = qstate.product_state(4, 2, [0] * 4)
    n = 10_000
    values = np.empty(n)
    for i in range(n):
        spec = CircuitSpec(4, 2, 2, layout=layout, gate_seed=RandomStream(606, i))
        values[i] = sum(
            b.born_prob**2 * qstate.purity(b.final_state, region)
            for b in circuit.enumerate_branches(spec, initial)
        )
    mask = CircuitSpec(4, 2, 2, layout=layout).measured_mask()
    model = statmech.LatticeModel(2, 2, 4, 2, measured=mask)
    z = math.exp(statmech.contract(model, statmech.BoundaryConfig(region)))
    se = values.std(ddof=1) / math.sqrt(n)
    record_property("detail", f"MC {values.mean():.5f} +- {se:.5f}, contraction {z:.5f}")
    assert abs(values.mean() - z) < 4 * se


@criterion(7, "learnability endpoints: single-shot 3/4 and 2/3, monitored 1/2 to 3/4")
def test_learnability_endpoints(record_property):
    batch = learn.single_shot_games(1024, 100_000, RandomStream(707))
    # the posterior of the truth has density 2x on [0, 1]
    ks = stats.kstest(batch.posterior_correct, lambda x: np.clip(x, 0, 1) ** 2).statistic
    spec = CircuitSpec(8, 2, 1)
    games = 2000
    blind = learn.monitored_games(spec, games, RandomStream(708))
    full = learn.monitored_games(CircuitSpec(8, 2, 1, p=1.0), games, RandomStream(709))
    se_blind = math.sqrt(0.25 / games)
    se_full = math.sqrt(full.accuracy * (1 - full.accuracy) / games)
    se_single = math.sqrt(batch.accuracy * (1 - batch.accuracy) / len(batch.correct))
    record_property(
        "detail",
        f"acc {batch.accuracy:.4f}, credence {batch.credence:.4f}, KS {ks:.4f}; "
        f"monitored p=0 {blind.accuracy:.3f}, p=1 {full.accuracy:.3f}",
    )
    assert abs(batch.accuracy - 0.75) < 0.01
    assert abs(batch.credence - 2 / 3) < 0.01
    assert ks < 0.02
    assert abs(blind.accuracy - 0.5) < 3 * se_blind
    assert abs(full.accuracy - batch.accuracy) < 3 * math.hypot(se_full, se_single)


@criterion(8, "Porter-Thomas KS distance below 0.01")
def test_porter_thomas(record_property):
    D = 1024
    states = haar.sample_haar_states(D, 1000, np.random.default_rng(808))
    ks = haar.porter_thomas_ks((np.abs(states) ** 2).ravel(), D)
    record_property("detail", f"KS {ks:.4f} over {states.size} draws")
    assert ks < 0.01


@criterion(9, "minimal-cut volume law, saturation and p_c crossing")
def test_percolation_threshold(record_property):
    sizes = np.array([4, 8, 12, 16, 24, 32])
    low, _ = mincut.volume_law_scan(sizes, 0.3, 400, RandomStream(909))
    high, high_err = mincut.volume_law_scan(sizes, 0.7, 400, RandomStream(910))
    fit = stats.linregress(sizes, low)
    flat = stats.linregress(sizes, high)
    est = mincut.estimate_pc(
        [8, 16, 32, 64], np.linspace(0.35, 0.65, 7), 2000, RandomStream(911)
    )
    record_property(
        "detail",
        f"R^2 {fit.rvalue**2:.4f} slope {fit.slope:.3f} at p=0.3; "
        f"slope {flat.slope:.4f} at p=0.7; p_c {est.p_c:.3f} "
        f"[{est.ci_low:.3f}, {est.ci_high:.3f}]",
    )
    assert fit.rvalue**2 > 0.99 and fit.slope > 0
    # saturation: no growth with L_A beyond noise, far below the volume-law slope
    assert abs(high[-1] - high[1]) < 3 * math.hypot(high_err[-1], high_err[1]) + 0.05
    assert abs(flat.slope) < 0.1 * fit.slope
    assert 0.45 <= est.p_c <= 0.55


@criterion(10, "trajectory Renyi-2 entropy never exceeds the minimal-cut bound")
def test_mincut_bound(record_property):
    rng = np.random.default_rng(1010)
    worst = -math.inf
    for i in range(200):
        L = int(rng.integers(2, 10))
        d = int(rng.choice([2, 3])) if L <= 6 else 2
        depth = int(rng.integers(1, 6))
        p = float(rng.random())
        a = int(rng.integers(L))
        b = int(rng.integers(a, L))
        region = tuple(range(a, b + 1))
        spec = CircuitSpec(L, d, depth, p).realization(RandomStream(1010, i))
        mask = spec.measured_mask()
        entropies = []
        circuit.run_trajectory(
            spec,
            qstate.product_state(L, d, [0] * L),
            RandomStream(1011, i),
            observe=lambda t, s: entropies.append(qstate.renyi_entropy(s, region, 2)),
        )
        for t, s2 in enumerate(entropies):
            graph = mincut.CutGraph(L, t, mask[: 2 * t])
            bound = mincut.percolation_entropy(mincut.minimal_cut(graph, region), d)
            worst = max(worst, s2 - bound)
            assert s2 <= bound + 1e-9, (L, d, depth, p, region, t)
    record_property("detail", f"200 specs, max S2 - bound = {worst:.2e}")


@criterion(11, "ancilla probe: S_R(0) = ln 2, p=0 stays ln 2, late S_R non-increasing in p")
def test_ancilla_probe(record_property):
    ln2 = math.log(2)
    grid = [0.0, 0.04, 0.08, 0.12, 0.16, 0.2]
    notes = []
    curves = {}
    for L in (8, 10, 12):
        late, err = [], []
        for j, p in enumerate(grid):
            spec = CircuitSpec(L, 2, 2 * L, p)
            est = circuit.ancilla_probe_curve(spec, 150, RandomStream(1111).child(L, j))
            assert np.all(est.mean[0] == pytest.approx(ln2, abs=1e-12))
            if p == 0.0:
                assert np.allclose(est.mean, ln2, atol=1e-10)
            late.append(est.mean[-1])
            err.append(est.stderr[-1])
        for k in range(len(grid) - 1):
            assert late[k + 1] <= late[k] + 3 * math.hypot(err[k], err[k + 1]), (L, grid[k + 1])
        curves[L] = np.array(late)
        notes.append(f"L={L}: " + " ".join(f"{x:.3f}" for x in late))
    # crossing: larger systems stay mixed longer at low p and purify faster at high p
    gap = curves[12] - curves[8]
    notes.append(f"S_R(12) - S_R(8) at p={grid[1]}: {gap[1]:+.3f}, at p={grid[-1]}: {gap[-1]:+.3f}")
    record_property("detail", "; ".join(notes))
    assert gap[1] > 0 > gap[-1]


def _fk_lattices():
    rng = np.random.default_rng(1212)
    lattices = [
        statmech.Lattice(1, ()),
        statmech.Lattice(2, ((0, 1),)),
        statmech.Lattice(2, ((0, 1), (0, 1))),
        statmech.square_lattice(2, 2),
        statmech.square_lattice(3, 3),
        statmech.square_lattice(2, 7),
        statmech.square_lattice(4, 4),
        statmech.circuit_potts_lattice(4, 2),
        statmech.circuit_potts_lattice(6, 3),
    ]
    for _ in range(20):
        n = int(rng.integers(2, 10))
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
        E = int(rng.integers(1, 25))
        edges = tuple(pairs[i] for i in rng.integers(len(pairs), size=E))
        lattices.append(statmech.Lattice(n, edges))
    return lattices


@criterion(12, "FK cluster expansion equals the Potts spin sum")
def test_fk_equals_spin_sum(record_property):
    worst = 0.0
    checked = 0
    for lat in _fk_lattices():
        assert len(lat.edges) <= statmech.MAX_FK_LINKS
        for Q in (1, 2, 3):
            if math.factorial(Q) ** lat.num_sites > statmech.MAX_SPIN_CONFIGS:
                continue
            for p in (0.0, 0.2, 0.5, 0.9, 1.0):
                z_fk = math.exp(statmech.fk_partition_function(lat, p, Q))
                z_spin = math.exp(statmech.potts_spin_sum(lat, p, Q))
                worst = max(worst, abs(z_fk - z_spin) / z_spin)
                checked += 1
    record_property("detail", f"{checked} cases, max relative error {worst:.1e}")
    assert worst < 1e-9
