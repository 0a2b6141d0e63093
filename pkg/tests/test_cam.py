import math

import numpy as np
import pytest

from surfbath import cam
from surfbath.bath import nn_coupling_matrix
from surfbath.cam import (
    CamCluster,
    EstimateParams,
    NoSignChangeError,
    boundary_correlation_sum,
    build_cluster,
    extrapolate,
    low_t_estimate,
    p_threshold_bound,
    solve_beta_c,
)
from surfbath.lattice import popcount
from surfbath.spinmodel import spins_of


@pytest.fixture(scope="module")
def c13():
    return build_cluster((2, 2), J=-1.0)


def brute_correlation_sum(cluster, beta):
    """Independent average over the star-filtered 2^N configurations."""
    lat = cluster.lattice
    allowed = np.array([x for x in range(1 << lat.N)
                        if all(popcount(x & s) % 2 == 0 for s in lat.stars)], dtype=np.uint64)
    s = spins_of(allowed, lat.N)
    E = np.einsum("ci,ij,cj->c", s, nn_coupling_matrix(lat, cluster.J).values.real, s)
    w = np.exp(-beta * (E - E.min()))
    corr = (s[:, [cluster.central]] * s[:, list(cluster.boundary)]).sum(axis=1)
    return float(np.sum(w * corr) / np.sum(w))


def test_cluster_fields(c13):
    assert c13.lattice.N == 13 and len(c13.boundary) == 8
    assert c13.central not in c13.boundary


def test_cluster_validation(c13):
    with pytest.raises(ValueError):
        CamCluster(c13.lattice, c13.boundary[0], c13.boundary, -1.0)
    with pytest.raises(ValueError):
        CamCluster(c13.lattice, c13.central, (), -1.0)
    with pytest.raises(ValueError):
        CamCluster(c13.lattice, c13.central, c13.boundary, 0.0)


@pytest.mark.parametrize("beta", [0.0, 0.2, 0.7])
def test_correlation_sum_against_brute_force(c13, beta):
    assert boundary_correlation_sum(c13, beta) == pytest.approx(brute_correlation_sum(c13, beta), abs=1e-13)


def test_correlation_sum_saturates(c13):
    assert boundary_correlation_sum(c13, 60.0) == pytest.approx(len(c13.boundary), rel=1e-12)


def test_correlation_sum_bounded_monotone():
    for n in (2, 3):
        cl = build_cluster((n, n))
        vals = [boundary_correlation_sum(cl, b) for b in np.linspace(0, 2, 81)]
        assert max(vals) <= len(cl.boundary) + 1e-12
        assert np.all(np.diff(vals) >= -1e-12)


def test_connected_variant_below_raw(c13):
    for beta in (0.1, 0.3, 1.0):
        conn = boundary_correlation_sum(c13, beta, connected=True)
        assert conn <= boundary_correlation_sum(c13, beta) + 1e-12


def test_pinned_beta_c_13(c13):
    bc = solve_beta_c(c13)
    # regression value from the first verified run of this solver
    assert bc == pytest.approx(0.31527318827409484, rel=1e-9)
    assert abs(cam.self_consistency_residual(c13, bc)) < 1e-6
    assert bc * abs(c13.J) >= 1 / len(c13.boundary)


def test_beta_c_scales_with_coupling():
    a = solve_beta_c(build_cluster((2, 2), J=-1.0))
    b = solve_beta_c(build_cluster((2, 2), J=-2.5))
    assert b * 2.5 == pytest.approx(a, rel=1e-9)


def test_bracket_without_root(c13):
    with pytest.raises(NoSignChangeError):
        solve_beta_c(c13, bracket=(1e-4, 0.1))
    with pytest.raises(NoSignChangeError):
        solve_beta_c(c13, connected=True)


def test_beta_c_decreases_with_size():
    bcs = [solve_beta_c(build_cluster((n, n))) for n in (2, 3, 4)]
    assert bcs[0] > bcs[1] > bcs[2]


def test_extrapolate_exact_line():
    res = extrapolate([(L, 1 / (5 + 1 / L)) for L in (2, 3, 4)])
    assert res.intercept == pytest.approx(5, abs=1e-12)
    assert res.slope == pytest.approx(1, abs=1e-12)
    assert res.beta_c == pytest.approx(0.2, abs=1e-13)


@pytest.mark.parametrize("pts", [[(3, 0.3), (3, 0.3), (3, 0.31)], [(2, 0.3), (3, 0.2)], [(2, -0.3), (3, 0.2), (4, 0.1)]])
def test_extrapolate_rejects(pts):
    with pytest.raises(ValueError):
        extrapolate(pts)


def test_run_cam_size_measures():
    a = cam.run_cam(size_measure="distance")
    b = cam.run_cam(size_measure="n")
    assert [L for L, _ in a.per_cluster] == [3, 4, 5]
    assert [L for L, _ in b.per_cluster] == [2, 3, 4]
    assert [x for _, x in a.per_cluster] == [x for _, x in b.per_cluster]
    assert a.beta_c > 0 and b.beta_c > 0
    with pytest.raises(ValueError):
        cam.run_cam(size_measure="sqrtN")


def test_low_t_estimate():
    assert low_t_estimate(EstimateParams(2.64, 4)) == pytest.approx(0.12, abs=0.002)
    assert low_t_estimate(EstimateParams(1.0, 4)) == 0.0
    ratio = low_t_estimate(EstimateParams(2.64, 4)) / 0.193
    assert ratio == pytest.approx(0.12 / 0.193, abs=0.01)


def test_p_bound():
    assert p_threshold_bound(EstimateParams(2.64, 4)) == pytest.approx(0.0607, abs=1e-4)
    assert p_threshold_bound(EstimateParams(2.64, 8)) == pytest.approx(p_threshold_bound(EstimateParams(2.64, 4)) / 2)
    assert p_threshold_bound(EstimateParams(math.e, 1)) == pytest.approx(0.25, rel=1e-15)
    for mu in (1.0, 2.64, 5.0):
        for n in (1, 3, 4):
            p = EstimateParams(mu, n)
            assert p_threshold_bound(p) == low_t_estimate(p) / 2


@pytest.mark.parametrize("kw", [dict(mu=0.5), dict(coord=0), dict(coord=2.5)])
def test_estimate_params_validation(kw):
    with pytest.raises(ValueError):
        EstimateParams(**kw)
