import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clonenet.finner import (
    MeasurementSetting,
    ObserverGrouping,
    ProbTable,
    SearchOptions,
    bilocality_residual,
    finner_ratio,
    modified_ratio,
    probabilities,
    qubit_distribution,
    search_violation,
)
from clonenet.netbuild import build

from oracles import ghz_state


def _pure(v):
    return np.outer(v, np.conj(v))


def _random_setting(n, rng):
    return MeasurementSetting(rng.uniform(0, np.pi, n), rng.uniform(0, 2 * np.pi, n))


def test_setting_canonical_chart():
    s = MeasurementSetting([3 * np.pi / 2, -0.5], [0.2, 0.1])
    assert all(0 <= t <= np.pi for t in s.theta)
    assert all(0 <= p < 2 * np.pi for p in s.phi)
    b = s.bases()
    for q in range(2):
        np.testing.assert_allclose(b[q].conj().T @ b[q], np.eye(2), atol=1e-15)


def test_setting_fold_is_global_phase():
    rng = np.random.default_rng(3)
    rho = _pure(ghz_state())
    raw = MeasurementSetting.from_vector(rng.uniform(-7, 7, 6))
    # shifting theta by 2 pi flips the sign of the basis vectors only
    shifted = MeasurementSetting(np.array(raw.theta) + 2 * np.pi, raw.phi)
    np.testing.assert_allclose(qubit_distribution(rho, raw), qubit_distribution(rho, shifted), atol=1e-14)


def test_computational_basis_tables():
    zero = np.zeros(8)
    zero[0] = 1
    p = probabilities(_pure(zero), MeasurementSetting.computational(3))
    assert p.probs[0, 0, 0] == pytest.approx(1.0)
    g = probabilities(_pure(ghz_state()), MeasurementSetting.computational(3))
    assert g.probs[0, 0, 0] == pytest.approx(0.5) and g.probs[1, 1, 1] == pytest.approx(0.5)
    assert g.labels == ("a", "b", "c")


def test_maximally_mixed_gives_uniform(rng):
    p = probabilities(np.eye(8) / 8, _random_setting(3, rng))
    np.testing.assert_allclose(p.probs, np.full((2, 2, 2), 1 / 8), atol=1e-14)


def test_coverage_mismatch():
    with pytest.raises(ValueError):
        probabilities(np.eye(8) / 8, MeasurementSetting.computational(2))
    with pytest.raises(ValueError):
        probabilities(np.eye(8) / 8, MeasurementSetting.computational(3), parties={"A": (1,), "B": (2,)})


def test_finner_ratio_examples():
    assert finner_ratio(ProbTable(("a", "b", "c"), np.full((2, 2, 2), 1 / 8))) == pytest.approx(0.5**1.5, abs=1e-12)
    assert finner_ratio(ProbTable(("a", "b", "c"), np.full((2, 2, 2), 1 / 8))) == pytest.approx(0.35355, abs=1e-5)
    g = probabilities(_pure(ghz_state()), MeasurementSetting.computational(3))
    assert finner_ratio(g) == pytest.approx(np.sqrt(2), abs=1e-9)
    point = np.zeros((2, 2, 2))
    point[0, 0, 0] = 1
    assert finner_ratio(ProbTable(("a", "b", "c"), point)) == pytest.approx(1.0)


def test_degenerate_tables_rejected():
    with pytest.raises(ValueError):
        ProbTable(("a", "b", "c"), np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        finner_ratio(ProbTable(("a",), np.array([0.5, 0.5])))


def test_modified_ratio_examples():
    assert modified_ratio(ProbTable(tuple("abcd"), np.full((2,) * 4, 1 / 16))) == pytest.approx(0.25, abs=1e-12)
    point = np.zeros((2,) * 6)
    point[(0,) * 6] = 1
    assert modified_ratio(ProbTable(tuple("abcdef"), point)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        modified_ratio(ProbTable(("a", "b", "c"), np.full((2, 2, 2), 1 / 8)))


def test_bilocality_residual_examples():
    indep = ProbTable(("a", "b", "c"), np.einsum("i,j,k->ijk", [0.3, 0.7], [0.5, 0.5], [0.9, 0.1]))
    assert bilocality_residual(indep) == pytest.approx(0.0, abs=1e-16)
    g = probabilities(_pure(ghz_state()), MeasurementSetting.computational(3))
    assert bilocality_residual(g) == pytest.approx(0.25, abs=1e-12)


def test_product_network_residual_vanishes(rng):
    net = build("local", 1.0, 0.0)
    for _ in range(10):
        p = probabilities(net, _random_setting(4, rng))
        assert bilocality_residual(p) < 1e-10


def test_fine_observer_labels():
    s4 = MeasurementSetting.computational(4)
    assert probabilities(build("local", 0.5, 0.1), s4, ObserverGrouping("fine")).labels == ("a", "b", "b'", "c")
    s6 = MeasurementSetting.computational(6)
    tri = probabilities(build("triangle", 0.5, 0.1), s6, ObserverGrouping("fine"))
    assert tri.labels == ("a", "a'", "b", "b'", "c", "c'")


def test_xor_reduction():
    # B holds qubits 2 and 4 of |0101>: lowest bit 1, XOR 1 ^ 1 = 0
    v = np.zeros(16)
    v[0b0101] = 1
    parties = {"A": (1,), "B": (2, 4), "C": (3,)}
    s = MeasurementSetting.computational(4)
    low = probabilities(_pure(v), s, ObserverGrouping("coarse", "lowest"), parties)
    xor = probabilities(_pure(v), s, ObserverGrouping("coarse", "xor"), parties)
    assert low.probs[0, 1, 0] == 1 and xor.probs[0, 0, 0] == 1


def test_relabeling_observers_with_qubits(rng):
    rho = _pure(rng.normal(size=8) + 1j * rng.normal(size=8))
    rho /= np.trace(rho)
    s = _random_setting(3, rng)
    p = probabilities(rho, s, parties={"A": (1,), "B": (2,), "C": (3,)})
    q = probabilities(rho, s, parties={"C": (3,), "A": (1,), "B": (2,)})
    np.testing.assert_allclose(q.probs, p.probs.transpose(2, 0, 1), atol=1e-15)


def test_prob_table_csv_round_trip(rng):
    p = probabilities(build("local", 0.4, 0.2), _random_setting(4, rng), ObserverGrouping("fine"))
    back = ProbTable.from_csv(p.to_csv())
    assert back.labels == p.labels
    np.testing.assert_allclose(back.probs, p.probs, rtol=1e-11, atol=1e-15)
    assert p.to_csv().splitlines()[0] == "a,b,b',c,probability"


def test_search_three_copies_reaches_ghz_bound():
    res = search_violation(build("three", 0.5, 0.0), "original", SearchOptions(starts=3, max_iters=200))
    assert res.best_ratio >= np.sqrt(2) - 1e-3
    assert res.best_ratio >= res.computational_ratio


def test_search_product_network_cannot_violate():
    net = build("local", 1.0, 0.0)
    for variant in ("original", "modified"):
        res = search_violation(net, variant, SearchOptions(starts=10, max_iters=200))
        assert res.best_ratio <= 1 + 1e-6


def test_search_is_deterministic_across_workers():
    net = build("nonlocal", 0.6, 0.1)
    a = search_violation(net, "modified", SearchOptions(starts=3, max_iters=100, seed=5, workers=1))
    b = search_violation(net, "modified", SearchOptions(starts=3, max_iters=100, seed=5, workers=3))
    assert a.best_ratio == b.best_ratio and a.start_values == b.start_values
    assert a.best_setting == b.best_setting


def test_search_extra_start_is_used():
    net = build("local", 0.5, 0.1)
    orig = search_violation(net, "original", SearchOptions(starts=1, max_iters=50))
    mod = search_violation(net, "modified", SearchOptions(starts=1, max_iters=50), extra_starts=[orig.best_setting])
    assert len(mod.start_values) == 3


@settings(max_examples=40, deadline=None)
@given(ps=st.lists(st.floats(0.01, 0.99), min_size=2, max_size=6))
def test_product_table_ratio(ps):
    margs = [np.array([p, 1 - p]) for p in ps]
    probs = margs[0]
    for m in margs[1:]:
        probs = np.multiply.outer(probs, m)
    table = ProbTable(tuple(f"o{k}" for k in range(len(ps))), probs)
    want = np.prod([np.sqrt(m.max()) for m in margs])
    assert finner_ratio(table) == pytest.approx(want, rel=1e-10)
    assert finner_ratio(table) <= 1 + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_residual_zero_when_ac_marginal_is_product(seed):
    rng = np.random.default_rng(seed)
    # A and C only touch B, never each other
    rho_ab = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho_ab = rho_ab @ rho_ab.conj().T
    rho_ab /= np.trace(rho_ab)
    rho_c = np.diag(rng.dirichlet([1, 1]))
    rho = np.kron(rho_ab, rho_c)
    p = probabilities(rho, _random_setting(3, rng))
    assert bilocality_residual(p) < 1e-10
