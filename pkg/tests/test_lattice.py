import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surfbath.lattice import (
    LatticeSpec,
    boundary_qubits,
    build_lattice,
    central_qubit,
    check_invariants,
    logical_x_path,
    logical_z_path,
    mask_of,
    neighbor_pairs,
    overlap_parity,
    popcount,
    qubits_of,
)


def commutes_with_all(mask, stabilizers):
    return all(popcount(mask & s) % 2 == 0 for s in stabilizers)


@pytest.mark.parametrize("n,m,N,nplaq,nstar", [(3, 3, 25, 12, 12), (4, 4, 41, 20, 20), (1, 1, 5, 2, 2)])
def test_counts(n, m, N, nplaq, nstar):
    lat = build_lattice(LatticeSpec(n, m))
    assert (lat.N, len(lat.plaquettes), len(lat.stars)) == (N, nplaq, nstar)


@settings(max_examples=36, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_invariants_hold(n, m):
    lat = build_lattice((n, m))
    assert check_invariants(lat) == []
    assert lat.N == n * m + (n + 1) * (m + 1)
    # every qubit belongs to at least one star
    assert mask_of(q for s in lat.stars for q in qubits_of(s)) == (1 << lat.N) - 1


@pytest.mark.parametrize("bad", [(0, 1), (1, 0), (-2, 3), (1.5, 2), (2, 2, 0.0)])
def test_rejects_bad_lattice_spec(bad):
    with pytest.raises(ValueError):
        LatticeSpec(*bad)


def test_deterministic_build():
    a, b = build_lattice((3, 4)), build_lattice((3, 4))
    assert a == b and hash(a) == hash(b)
    assert a.to_json() == b.to_json()


def test_json_export():
    lat = build_lattice((2, 2))
    d = json.loads(lat.to_json())
    assert d["N"] == 13 and len(d["stars"]) == 6
    assert int(d["gamma_x"], 16) == lat.gamma_x


def test_stabilizer_weights():
    lat = build_lattice((3, 3))
    star_w = sorted(popcount(s) for s in lat.stars)
    plaq_w = sorted(popcount(p) for p in lat.plaquettes)
    # three-qubit stabilizers only along the edges of the patch
    assert star_w.count(3) == 2 * 3 and plaq_w.count(3) == 2 * 3
    assert set(star_w) == set(plaq_w) == {3, 4}


@pytest.mark.parametrize("n,m,col,size", [(3, 3, 2, 4), (1, 1, 0, 2)])
def test_logical_x_path(n, m, col, size):
    lat = build_lattice((n, m))
    gx = logical_x_path(lat, col)
    assert popcount(gx) == size
    assert commutes_with_all(gx, lat.plaquettes)
    assert overlap_parity(gx, lat.gamma_z) == 1
    # not itself a product of stars (it is a logical operator)
    span = {0}
    for s in lat.stars:
        span |= {x ^ s for x in span}
    assert gx not in span


def test_logical_z_path_small():
    lat = build_lattice((1, 1))
    gz = logical_z_path(lat, 0)
    assert qubits_of(gz) == [lat.horizontal(0, 0), lat.horizontal(0, 1)]
    assert commutes_with_all(gz, lat.stars)


def test_logical_z_path_middle():
    lat = build_lattice((3, 3))
    gz = logical_z_path(lat, 1)
    assert overlap_parity(gz, lat.gamma_x) == 1
    assert commutes_with_all(gz, lat.stars)


def test_all_x_paths_equivalent_up_to_stars():
    lat = build_lattice((3, 2))
    span = {0}
    for s in lat.stars:
        span |= {x ^ s for x in span}
    paths = [logical_x_path(lat, c) for c in range(lat.n + 1)]
    assert all(p ^ paths[0] in span for p in paths)


@pytest.mark.parametrize("bad", [-1, 4])
def test_path_index_checked(bad):
    lat = build_lattice((3, 3))
    with pytest.raises(IndexError):
        logical_x_path(lat, bad)
    with pytest.raises(IndexError):
        logical_z_path(lat, bad)


def test_brute_force_logical_count():
    """Star-commuting Z strings modulo plaquettes: exactly one logical class."""
    lat = build_lattice((1, 1))
    kernel = [x for x in range(1 << lat.N) if commutes_with_all(x, lat.stars)]
    span = {0}
    for p in lat.plaquettes:
        span |= {x ^ p for x in span}
    assert len(kernel) == 2 * len(span)
    assert lat.gamma_z in kernel and lat.gamma_z not in span


def test_neighbor_pairs_against_scan():
    lat = build_lattice((1, 1))
    pos = lat.positions
    expected = sum(
        1 for i, j in itertools.combinations(range(lat.N), 2)
        if np.hypot(*(pos[i] - pos[j])) <= 1 / math.sqrt(2) + 1e-12
    )
    assert len(neighbor_pairs(lat)) == expected == 4


def test_neighbor_pairs_extremes():
    lat = build_lattice((3, 3))
    assert neighbor_pairs(lat, 1e-9) == []
    assert len(neighbor_pairs(lat, 3 * math.sqrt(2))) == 300
    with pytest.raises(ValueError):
        neighbor_pairs(lat, 0.0)


def test_nearest_pairs_meet_at_a_vertex():
    lat = build_lattice((2, 3))
    for i, j, d in neighbor_pairs(lat):
        assert d == pytest.approx(1 / math.sqrt(2))
        # perpendicular edges: one horizontal (integer x) and one vertical
        xi, xj = lat.positions[i, 0], lat.positions[j, 0]
        assert (xi % 1 == 0) != (xj % 1 == 0)


def test_neighbor_pairs_scale_with_a():
    lat = build_lattice(LatticeSpec(2, 2, a=2.5))
    pairs = neighbor_pairs(lat)
    assert len(pairs) == 16
    assert all(d == pytest.approx(2.5 / math.sqrt(2)) for *_, d in pairs)


@pytest.mark.parametrize("n,size", [(2, 8), (3, 12), (4, 16)])
def test_cluster_geometry(n, size):
    lat = build_lattice((n, n))
    b = boundary_qubits(lat)
    c = central_qubit(lat)
    assert popcount(b) == size
    assert not (b >> c) & 1
