import json

import numpy as np
import pytest

from clonenet.errors import DomainError
from clonenet.netbuild import (
    INTENDED_ENTANGLED,
    PARTIES,
    NetworkState,
    Topology,
    build,
    input_pair,
    pair_entanglement_map,
    pair_equality_classes,
    reduced,
    topology_d_max,
    two_qubit_negativity,
    usable,
)

CLASSICAL_PAIR = np.diag([0.5, 0, 0, 0.5])


def _same(net, p, q):
    return np.linalg.norm(reduced(net, p).data - reduced(net, q).data) < 1e-10


def test_input_pair_examples():
    np.testing.assert_array_equal(input_pair(1.0), [1, 0, 0, 0])
    np.testing.assert_allclose(input_pair(0.5), np.array([1, 0, 0, 1]) / np.sqrt(2), atol=1e-16)
    v = input_pair(0.25)
    np.testing.assert_allclose(v, [0.5, 0, 0, np.sqrt(3) / 2], atol=1e-16)
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        input_pair(1.2)


def test_topology_parse():
    assert Topology.parse("triangle") is Topology.TRIANGLE_NONLOCAL
    assert Topology.parse("bilocal-nonlocal") is Topology.BILOCAL_NONLOCAL
    with pytest.raises(ValueError):
        Topology.parse("square")


@pytest.mark.parametrize("topo,n", [("three_copies", 3), ("bilocal_local", 4), ("bilocal_nonlocal", 4), ("triangle_nonlocal", 6)])
def test_build_shapes_and_parties(topo, n):
    net = build(topo, 0.37, 0.5 * topology_d_max(topo))
    assert net.num_qubits == n
    assert abs(np.trace(net.rho.data) - 1) < 1e-12
    np.testing.assert_allclose(net.rho.data, net.rho.data.conj().T, atol=1e-14)
    labels = sorted(q for qs in net.parties.values() for q in qs)
    assert labels == list(range(1, n + 1))


def test_build_rejects_large_d():
    with pytest.raises(DomainError):
        build("triangle", 0.5, 0.3)


def test_party_maps():
    assert PARTIES[Topology.BILOCAL_LOCAL] == {"A": (1,), "B": (2, 4), "C": (3,)}
    assert PARTIES[Topology.TRIANGLE_NONLOCAL] == {"A": (1, 6), "B": (4, 5), "C": (2, 3)}


@pytest.mark.parametrize("topo", ["bilocal_local", "bilocal_nonlocal"])
def test_zero_d_pairs_are_classically_correlated(topo):
    net = build(topo, 0.5, 0.0)
    np.testing.assert_allclose(reduced(net, [1, 2]).data, CLASSICAL_PAIR, atol=1e-15)
    np.testing.assert_allclose(reduced(net, [1, 3]).data, CLASSICAL_PAIR, atol=1e-15)


def test_reduced_full_set_and_bad_label():
    net = build("local", 0.4, 0.2)
    np.testing.assert_array_equal(reduced(net, [1, 2, 3, 4]).data, net.rho.data)
    with pytest.raises(ValueError):
        reduced(net, [0, 1])


@pytest.mark.parametrize("a2", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("frac", [0.2, 0.6, 1.0])
def test_local_bilocal_equalities(a2, frac):
    net = build("local", a2, frac * topology_d_max("local"))
    for p in [(1, 4), (2, 3), (3, 4)]:
        assert _same(net, (1, 2), p)
    assert _same(net, (1, 3), (2, 4))


def test_nonlocal_bilocal_equality_classes():
    # joint cloning of the pair: clone-internal, same-side and opposite-side pairs
    net = build("nonlocal", 0.3, 0.2)
    assert pair_equality_classes(net) == [[(1, 2), (3, 4)], [(1, 3), (2, 4)], [(1, 4), (2, 3)]]


def test_triangle_equality_classes():
    net = build("triangle", 0.3, 0.1)
    classes = {tuple(c) for c in pair_equality_classes(net)}
    assert classes == {
        ((1, 2), (3, 4), (5, 6)),
        ((1, 3), (1, 5), (2, 4), (2, 6), (3, 5), (4, 6)),
        ((1, 4), (1, 6), (2, 3), (2, 5), (3, 6), (4, 5)),
    }


@pytest.mark.parametrize("topo", list(Topology))
@pytest.mark.parametrize("a2", [0.0, 1.0])
def test_product_input_at_zero_d_is_separable(topo, a2):
    net = build(topo, a2, 0.0)
    assert not any(pc.entangled for pc in pair_entanglement_map(net))


def test_bilocal_clones_entangle_at_product_input():
    # the local cloner itself entangles its two outputs once d > 0
    net = build("local", 1.0, 0.1)
    ent = {pc.pair for pc in pair_entanglement_map(net) if pc.entangled}
    assert ent == {(1, 3), (2, 4)}


def test_nonlocal_bilocal_region_point_exists():
    found = False
    for d in np.linspace(0.02, 0.3, 8):
        net = build("nonlocal", 0.5, d)
        neg = {pc.pair: pc.negativity for pc in pair_entanglement_map(net)}
        if neg[(1, 2)] > 1e-9 and neg[(1, 3)] <= 1e-9:
            found = True
            break
    assert found


def test_local_bilocal_usable_point():
    assert usable(build("local", 0.5, 0.1))
    assert not usable(build("local", 1.0, 0.1))


def test_negativity_of_bell_pair():
    bell = np.zeros((4, 4))
    bell[0, 0] = bell[0, 3] = bell[3, 0] = bell[3, 3] = 0.5
    assert two_qubit_negativity(bell) == pytest.approx(0.5, abs=1e-14)


def test_intended_pairs_cover_links():
    assert INTENDED_ENTANGLED[Topology.BILOCAL_LOCAL] == ((1, 2), (3, 4))
    assert INTENDED_ENTANGLED[Topology.TRIANGLE_NONLOCAL] == ((1, 2), (3, 4), (5, 6))


def test_json_round_trip():
    net = build("triangle", 0.42, 0.07)
    doc = json.loads(net.dumps())
    assert doc["topology"] == "triangle_nonlocal" and len(doc["rho"]) == 64 * 64
    back = NetworkState.from_json(doc)
    np.testing.assert_array_equal(back.rho.data, net.rho.data)
    assert back.parties == net.parties and back.alpha_sq == 0.42 and back.d == 0.07


def test_distinct_and_shared_agree_on_basis_input():
    # with a basis input every machine ket pairs with a single branch
    a = build("local", 1.0, 0.2, "shared").rho.data
    b = build("local", 1.0, 0.2, "distinct").rho.data
    np.testing.assert_allclose(a, b, atol=1e-14)
