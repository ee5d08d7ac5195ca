import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clonenet.entmeas import (
    Bipartition,
    EsqOptions,
    conditional_mutual_information,
    dependence,
    is_ppt,
    mutual_information,
    negativity,
    squashed_upper,
    tmi,
)
from clonenet.errors import CapacityError
from clonenet.netbuild import build
from clonenet.qmat import DensityMatrix, entropy, partial_trace, random_density_matrix, random_pure_state

from oracles import bell_state, entropy_bits, ghz_state

AB = Bipartition([0], [1])
FAST = EsqOptions(restarts=2, max_iters=300)


def _pure(v):
    return np.outer(v, np.conj(v))


def classical_pair():
    return np.diag([0.5, 0, 0, 0.5]).astype(complex)


def test_bipartition_validation():
    with pytest.raises(ValueError):
        Bipartition([0, 1], [1])
    with pytest.raises(ValueError):
        Bipartition([], [1])
    assert Bipartition([2, 0], [1]).side_a == (0, 2)


def test_negativity_examples():
    assert negativity(_pure(bell_state()), AB) == pytest.approx(0.5, abs=1e-14)
    assert negativity(np.kron(np.diag([1, 0]), np.eye(2) / 2), AB) == pytest.approx(0.0, abs=1e-15)
    psi = np.array([0.5, 0, 0, np.sqrt(0.75)])
    assert negativity(_pure(psi), AB) == pytest.approx(np.sqrt(0.25 * 0.75), abs=1e-12)
    assert negativity(_pure(psi), AB) == pytest.approx(0.433013, abs=1e-6)


def test_ppt_flag_matches_negativity():
    assert is_ppt(classical_pair(), AB)
    assert not is_ppt(_pure(bell_state()), AB)


def test_mutual_information_examples():
    assert mutual_information(np.eye(4) / 4, AB) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(_pure(bell_state()), AB) == pytest.approx(2.0, abs=1e-12)
    assert mutual_information(classical_pair(), AB) == pytest.approx(1.0, abs=1e-12)


def test_conditional_mutual_information_classical_copy():
    # |000> + |111> mixture: given E = third bit, A and B are independent
    rho = np.zeros((8, 8))
    rho[0, 0] = rho[7, 7] = 0.5
    assert conditional_mutual_information(rho, [0], [1], [2]) == pytest.approx(0.0, abs=1e-12)
    assert conditional_mutual_information(rho, [0], [1], []) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        conditional_mutual_information(rho, [0], [0], [2])


def test_tmi_examples():
    rng = np.random.default_rng(0)
    prod = np.kron(np.kron(random_density_matrix(2, rng), random_density_matrix(2, rng)), random_density_matrix(2, rng))
    assert tmi(prod, [[0], [1], [2]]) == pytest.approx(0.0, abs=1e-12)
    ghz_diag = np.zeros((8, 8))
    ghz_diag[0, 0] = ghz_diag[7, 7] = 0.5
    assert tmi(ghz_diag, [[0], [1], [2]]) == pytest.approx(1.0, abs=1e-12)
    assert tmi(_pure(ghz_state()), [[0], [1], [2]]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        tmi(ghz_diag, [[0], [0, 1], [2]])


def test_tmi_matches_entropy_arithmetic():
    rng = np.random.default_rng(2)
    rho = random_density_matrix(8, rng)
    s = lambda keep: entropy(partial_trace(rho, keep))
    want = s([0, 1, 2]) + s([0]) + s([1]) + s([2]) - s([0, 1]) - s([0, 2]) - s([1, 2])
    assert tmi(rho, [[0], [1], [2]]) == pytest.approx(want, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), perm=st.permutations([0, 1, 2]))
def test_tmi_symmetric_under_part_permutation(seed, perm):
    rho = random_density_matrix(16, np.random.default_rng(seed))
    parts = [[0], [1, 2], [3]]
    assert tmi(rho, [parts[i] for i in perm]) == pytest.approx(tmi(rho, parts), abs=1e-10)


def test_esq_bell_is_one():
    res = squashed_upper(_pure(bell_state()), AB, FAST)
    assert res.estimate == pytest.approx(1.0, abs=1e-6)
    assert res.converged


def test_esq_pure_states_equal_marginal_entropy():
    rng = np.random.default_rng(11)
    for dims in [(2, 2), (2, 4), (4, 2)]:
        for _ in range(4):
            psi = random_pure_state(dims[0] * dims[1], rng)
            rho = _pure(psi)
            sa = entropy(partial_trace(rho, [0], dims))
            res = squashed_upper(DensityMatrix(rho, dims), AB, EsqOptions(seed=rng.integers(1000)))
            assert res.estimate == pytest.approx(sa, abs=1e-6)


def test_esq_classical_fixture_near_zero():
    res = squashed_upper(classical_pair(), AB, FAST)
    assert res.estimate <= 1e-4
    assert res.trivial_bound == pytest.approx(0.5, abs=1e-12)


def test_esq_bounded_by_trivial_extension():
    rng = np.random.default_rng(4)
    for _ in range(3):
        rho = random_density_matrix(4, rng, rank=2)
        res = squashed_upper(rho, AB, FAST)
        assert 0 <= res.estimate <= 0.5 * mutual_information(rho, AB) + 1e-9


def test_esq_werner_improves_on_trivial():
    p = 0.6
    rho = p * _pure(bell_state()) + (1 - p) * np.eye(4) / 4
    res = squashed_upper(rho, AB, EsqOptions(restarts=1, max_iters=2000))
    assert res.estimate < res.trivial_bound - 1e-3


def test_esq_restarts_are_nested():
    rng = np.random.default_rng(9)
    rho = random_density_matrix(4, rng, rank=2)
    few = squashed_upper(rho, AB, EsqOptions(restarts=2, max_iters=200, seed=3))
    more = squashed_upper(rho, AB, EsqOptions(restarts=4, max_iters=200, seed=3))
    assert more.restart_values[:2] == few.restart_values
    assert more.estimate <= few.estimate


def test_esq_independent_of_worker_count():
    rho = random_density_matrix(4, np.random.default_rng(6), rank=3)
    a = squashed_upper(rho, AB, EsqOptions(restarts=3, max_iters=200, seed=1, workers=1))
    b = squashed_upper(rho, AB, EsqOptions(restarts=3, max_iters=200, seed=1, workers=3))
    assert a.estimate == b.estimate and a.restart_values == b.restart_values


def test_esq_capacity_limit():
    rho = np.eye(512) / 512
    with pytest.raises(CapacityError):
        squashed_upper(rho, Bipartition([0], list(range(1, 9))), FAST)


def test_esq_options_validation():
    with pytest.raises(ValueError):
        EsqOptions(extension_dim=0)
    with pytest.raises(ValueError):
        EsqOptions(method="bfgs")


def test_dependence_requires_triangle():
    with pytest.raises(ValueError):
        dependence(build("local", 0.5, 0.1), FAST)


def test_dependence_reports_components():
    net = build("triangle", 0.5, 0.05)
    dep = dependence(net, EsqOptions(restarts=1, max_iters=50))
    want = abs(dep.e_a_bc.estimate - dep.e_a_b.estimate - dep.e_a_c.estimate)
    assert dep.value == pytest.approx(want, abs=1e-15)
    for term in (dep.e_a_bc, dep.e_a_b, dep.e_a_c):
        assert 0 <= term.estimate <= term.trivial_bound + 1e-9


def test_entropy_oracle_agrees():
    assert entropy(np.diag([0.5, 0.25, 0.25])) == pytest.approx(entropy_bits([0.5, 0.25, 0.25]), abs=1e-14)
