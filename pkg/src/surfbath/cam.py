"""Critical coupling of the constrained nearest-neighbour model.

Two routes are provided:

* a cluster mean-field solver (coherent anomaly method).  A finite surface
  code is the cluster, its outermost qubits feel the mean field, and the
  self-consistency condition

      1 - beta_c |J| sum_{i in boundary} <S_0 S_i>_cl = 0

  fixes ``beta_c`` per cluster.  ``T_c = 1 / beta_c`` is then fitted
  linearly against ``1 / L`` and extrapolated to ``1 / L = 0``;
* a low-temperature self-avoiding-walk estimate ``beta_c J = ln(mu) / (2 n)``
  and the matching flip-probability bound ``ln(mu) / (4 n)``.

The boundary field itself is never stored: it is eliminated by the
self-consistency condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .bath import nn_coupling_matrix
from .lattice import (
    Lattice,
    LatticeSpec,
    boundary_qubits,
    build_lattice,
    central_qubit,
    check_invariants,
    qubits_of,
)
from .spinmodel import antiparallel_counts, build_ensemble, map_chunks

SIZE_MEASURES = ("distance", "n")
DEFAULT_BRACKET = (1e-4, 2.0)
MAX_CLUSTER_N = 64


class NoSignChangeError(ValueError):
    """The self-consistency residual does not change sign on the bracket."""


@dataclass(frozen=True)
class CamCluster:
    lattice: Lattice
    central: int
    boundary: tuple[int, ...]
    J: float

    def __post_init__(self):
        if self.central in self.boundary:
            raise ValueError("central qubit lies on the boundary")
        if not self.boundary:
            raise ValueError("empty boundary")
        if not np.isreal(self.J) or self.J == 0:
            raise ValueError("cluster coupling must be real and nonzero")

    def size(self, measure: str = "distance") -> int:
        if measure == "distance":
            return self.lattice.distance
        if measure == "n":
            return self.lattice.n
        raise ValueError(f"unknown size measure {measure!r}; expected one of {SIZE_MEASURES}")


def build_cluster(spec: LatticeSpec | tuple, J: float = -1.0) -> CamCluster:
    lat = build_lattice(spec)
    problems = check_invariants(lat)
    if problems:
        raise ValueError(f"cluster lattice is inconsistent: {problems}")
    if lat.N > MAX_CLUSTER_N:
        raise ValueError(f"cluster too large for exact enumeration (N={lat.N})")
    return CamCluster(lat, central_qubit(lat), tuple(qubits_of(boundary_qubits(lat))), float(J))


@dataclass(frozen=True)
class ClusterTable:
    """Ensemble sums binned by antiparallel-pair count k.

    ``count[k]`` configurations; ``corr[k]`` = sum over them of
    sum_i s_0 s_i (i on the boundary); ``s0[k]`` and ``si[b, k]`` hold the
    single-spin sums needed for connected correlators.
    """

    n_pairs: int
    count: np.ndarray
    corr: np.ndarray
    s0: np.ndarray
    si: np.ndarray
    corr_i: np.ndarray


_TABLES: dict[tuple, ClusterTable] = {}


def cluster_table(cluster: CamCluster, workers: int = 1) -> ClusterTable:
    key = (cluster.lattice.spec, cluster.central, cluster.boundary)
    if key in _TABLES:
        return _TABLES[key]
    lat = cluster.lattice
    ens = build_ensemble(lat)
    pairs = nn_coupling_matrix(lat, cluster.J).pairs
    P = len(pairs)
    c, bnd = cluster.central, np.array(cluster.boundary, dtype=np.uint64)
    one = np.uint64(1)

    def fn(masks):
        k = antiparallel_counts(masks, pairs)
        s0 = 1 - 2 * ((masks >> np.uint64(c)) & one).astype(np.int64)
        si = 1 - 2 * ((masks[None, :] >> bnd[:, None]) & one).astype(np.int64)
        prod = si * s0[None, :]
        binc = lambda w: np.bincount(k, weights=w, minlength=P + 1)  # noqa: E731
        return (
            np.bincount(k, minlength=P + 1),
            binc(prod.sum(axis=0)),
            binc(s0),
            np.array([binc(row) for row in si]),
            np.array([binc(row) for row in prod]),
        )

    parts = map_chunks(ens, fn, workers)
    table = ClusterTable(
        n_pairs=P,
        count=np.sum([p[0] for p in parts], axis=0),
        corr=np.sum([p[1] for p in parts], axis=0),
        s0=np.sum([p[2] for p in parts], axis=0),
        si=np.sum([p[3] for p in parts], axis=0),
        corr_i=np.sum([p[4] for p in parts], axis=0),
    )
    _TABLES[key] = table
    return table


def _boltzmann(table: ClusterTable, J: float, beta: float) -> np.ndarray:
    k = np.arange(table.n_pairs + 1)
    E = J * (table.n_pairs - 2 * k)
    occ = table.count > 0
    w = np.zeros(len(k))
    w[occ] = np.exp(-beta * (E[occ] - E[occ].min()))
    return w


def boundary_correlation_sum(cluster: CamCluster, beta: float, *, connected: bool = False,
                             workers: int = 1) -> float:
    """sum_{i in boundary} <S_0 S_i> over the restricted ensemble, no boundary field."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    t = cluster_table(cluster, workers)
    w = _boltzmann(t, cluster.J, beta)
    Z = math.fsum(t.count * w)
    raw = math.fsum(t.corr * w) / Z
    if not connected:
        return raw
    m0 = math.fsum(t.s0 * w) / Z
    mi = np.array([math.fsum(row * w) for row in t.si]) / Z
    return raw - m0 * math.fsum(mi)


def self_consistency_residual(cluster: CamCluster, beta: float, **kw) -> float:
    return 1.0 - beta * abs(cluster.J) * boundary_correlation_sum(cluster, beta, **kw)


def solve_beta_c(cluster: CamCluster, bracket: tuple[float, float] = DEFAULT_BRACKET,
                 *, rtol: float = 1e-12, connected: bool = False, workers: int = 1) -> float:
    """Root of the self-consistency condition by bisection.

    ``bracket`` is given in units of ``beta |J|``.  The returned value is
    ``beta_c`` itself.
    """
    lo, hi = (b / abs(cluster.J) for b in bracket)
    f = lambda b: self_consistency_residual(cluster, b, connected=connected, workers=workers)  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise NoSignChangeError(
            f"self-consistency residual has no sign change on beta|J| in {bracket}"
        )
    return optimize.bisect(f, lo, hi, xtol=1e-15, rtol=rtol, maxiter=200)


@dataclass(frozen=True)
class CamResult:
    per_cluster: tuple[tuple[float, float], ...]
    beta_c: float
    beta_c_err: float
    slope: float
    intercept: float
    intercept_err: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def T_c(self) -> float:
        return self.intercept


def extrapolate(results: Sequence[tuple[float, float]], meta: dict | None = None) -> CamResult:
    """Linear least squares of T_c = 1/beta_c against 1/L, evaluated at 1/L = 0."""
    pts = [(float(L), float(b)) for L, b in results]
    if len(pts) < 3:
        raise ValueError("extrapolation needs at least three cluster sizes")
    if any(L <= 0 or b <= 0 for L, b in pts):
        raise ValueError("sizes and beta_c values must be positive")
    x = np.array([1 / L for L, _ in pts])
    if np.ptp(x) == 0 or len(np.unique(x)) < 2:
        raise ValueError("degenerate fit: all cluster sizes equal")
    y = np.array([1 / b for _, b in pts])
    fit = stats.linregress(x, y)
    T0, dT = float(fit.intercept), float(fit.intercept_stderr)
    if not T0 > 0:
        raise ValueError(f"extrapolated T_c = {T0:g} is not positive")
    return CamResult(
        per_cluster=tuple(pts),
        beta_c=1 / T0,
        beta_c_err=dT / T0**2,
        slope=float(fit.slope),
        intercept=T0,
        intercept_err=dT,
        meta=dict(meta or {}, abscissa="1/L", ordinate="T_c = 1/beta_c"),
    )


def run_cam(sizes: Sequence[int] = (2, 3, 4), J: float = -1.0, *, size_measure: str = "distance",
            connected: bool = False, bracket: tuple[float, float] = DEFAULT_BRACKET,
            workers: int = 1) -> CamResult:
    """Solve the square clusters n = m = size and extrapolate.

    ``size_measure`` picks the linear size L used on the abscissa: the code
    distance ``n + 1`` (qubits along a side) or ``n`` itself.
    """
    if size_measure not in SIZE_MEASURES:
        raise ValueError(f"unknown size measure {size_measure!r}; expected one of {SIZE_MEASURES}")
    rows, pts = [], []
    for n in sizes:
        cl = build_cluster((n, n), J)
        bc = solve_beta_c(cl, bracket, connected=connected, workers=workers)
        L = cl.size(size_measure)
        pts.append((L, bc))
        rows.append({
            "n": n, "m": n, "N": cl.lattice.N, "L": L, "beta_c": bc,
            "beta_c_J": bc * abs(J),
            "residual": self_consistency_residual(cl, bc, connected=connected),
            "boundary_size": len(cl.boundary), "central": cl.central,
        })
    res = extrapolate(pts, meta={
        "clusters": rows, "size_measure": size_measure, "J": J,
        "correlator": "connected" if connected else "raw",
    })
    return res


@dataclass(frozen=True)
class EstimateParams:
    mu: float = 2.64
    coord: int = 4

    def __post_init__(self):
        if not self.mu >= 1:
            raise ValueError("connective constant must be >= 1")
        if int(self.coord) != self.coord or self.coord < 1:
            raise ValueError("coordination number must be a positive integer")


def low_t_estimate(params: EstimateParams) -> float:
    """beta_c J ~ ln(mu) / (2 n): walk entropy balanced against 2 n J per spin."""
    return math.log(params.mu) / (2 * params.coord)


def p_threshold_bound(params: EstimateParams) -> float:
    """Flip-probability bound ln(mu) / (4 n) (half the low-T estimate)."""
    return math.log(params.mu) / (4 * params.coord)
