"""Bosonic-bath correlators and the quantities derived from them.

Conventions
-----------
* ``D = 2``; ``s`` is -1/2 (sub-Ohmic), 0 (Ohmic) or +1/2 (super-Ohmic).
* ``g_real(d)`` is the vacuum correlator G^R at separation ``d``;
  ``g_imag(d)`` is the real number ``g`` with G^I = i g.
* Step functions take the inside-cone branch at ``d == v*delta``.  Only the
  super-Ohmic forms are singular there; they raise
  :class:`LightConeSingularityError` within ``1e-9 * v*delta`` of the cone.
* The on-site imaginary correlator is zero by definition.
* On-site G^R diverges in the ultraviolet for ``s >= 0``.  With an explicit
  momentum cutoff ``L`` it is regularised as the large-``L`` asymptote of
  the closed form at separation ``1/L``:
  ``ln(2 v delta L) / (pi w0^2)`` (Ohmic) and ``v L / (pi w0^3)``
  (super-Ohmic).

Effective couplings use E_S = sum_{i != j} J_ij s_i s_j with
J_ij = (lambda^2 / 2 beta) Phi_ij, which for the Ohmic bath reduces to
J_ij = [arcosh(v delta / d) + i pi/2] / 2 inside the light cone and
(i/2) arcsin(v delta / d) outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice, neighbor_pairs
from .quadrature import QuadResult, bessel_integral

SUPPORTED_S = (-0.5, 0.0, 0.5)
CONE_EPS = 1e-9


class CutoffRequiredError(ValueError):
    """An ultraviolet-divergent quantity was requested without a cutoff."""


class LightConeSingularityError(ValueError):
    """Super-Ohmic correlator evaluated on its singular light-cone ring."""


@dataclass(frozen=True)
class BathParams:
    s: float
    v: float = 1.0
    omega0: float = 1.0
    delta: float = 1.0
    lam: float = 1.0
    cutoff: float | None = None
    D: int = 2

    def __post_init__(self):
        if self.s not in SUPPORTED_S:
            raise ValueError(f"bath exponent s={self.s!r} not in {SUPPORTED_S}")
        if self.D != 2:
            raise ValueError("only two-dimensional baths (D=2) are supported")
        for name in ("v", "omega0", "delta", "lam"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.omega0 == 0:
            raise ValueError("omega0 must be positive")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ValueError("cutoff must be positive when given")

    @property
    def vdelta(self) -> float:
        return self.v * self.delta

    @property
    def kind(self) -> str:
        return {-0.5: "sub-Ohmic", 0.0: "Ohmic", 0.5: "super-Ohmic"}[self.s]


def _prefactor(bath: BathParams) -> float:
    """(v/w0)^(2+2s) / (pi v^2): converts the k-integrals into G^R, G^I."""
    s, v, w0 = bath.s, bath.v, bath.omega0
    if s == -0.5:
        return 1.0 / (math.pi * v * w0)
    if s == 0.0:
        return 1.0 / (math.pi * w0**2)
    return v / (math.pi * w0**3)


def _check_ring(bath: BathParams, d: float):
    c = bath.vdelta
    if bath.s == 0.5 and abs(d - c) <= CONE_EPS * c:
        raise LightConeSingularityError(
            f"super-Ohmic correlator is singular at d = v*delta = {c:g}"
        )


def onsite_g_real(bath: BathParams) -> float:
    """G^R_rr, the zero-separation vacuum correlator."""
    s, w0, c = bath.s, bath.omega0, bath.vdelta
    if s == -0.5:
        return bath.delta / (2 * w0)
    if bath.cutoff is None:
        raise CutoffRequiredError(
            f"on-site correlator of the {bath.kind} bath diverges; supply a momentum cutoff"
        )
    if s == 0.0:
        return math.log(2 * c * bath.cutoff) / (math.pi * w0**2)
    return bath.v * bath.cutoff / (math.pi * w0**3)


def g_real(bath: BathParams, d: float) -> float:
    if d < 0:
        raise ValueError("separation must be non-negative")
    if d == 0:
        return onsite_g_real(bath)
    _check_ring(bath, d)
    s, v, w0, delta = bath.s, bath.v, bath.omega0, bath.delta
    c = bath.vdelta
    inside = d <= c
    if s == -0.5:
        out = -d / (math.pi * v * w0)
        if inside:
            return out + delta / (2 * w0)
        ratio = c / d
        return out + delta / (math.pi * w0) * (math.asin(ratio) + math.sqrt(1 / ratio**2 - 1))
    if s == 0.0:
        return math.acosh(c / d) / (math.pi * w0**2) if inside else 0.0
    out = 1.0 / d
    if not inside:
        out -= 1.0 / math.sqrt(d * d - c * c)
    return v / (math.pi * w0**3) * out


def g_imag(bath: BathParams, d: float) -> float:
    if d < 0:
        raise ValueError("separation must be non-negative")
    if d == 0:
        return 0.0
    _check_ring(bath, d)
    s, v, w0, delta = bath.s, bath.v, bath.omega0, bath.delta
    c = bath.vdelta
    inside = d <= c
    if s == -0.5:
        if not inside:
            return 0.0
        x = c / d
        return -delta / (math.pi * w0) * (math.acosh(x) - math.sqrt(1 - 1 / x**2))
    if s == 0.0:
        return (0.5 * math.pi if inside else math.asin(c / d)) / (math.pi * w0**2)
    if not inside:
        return 0.0
    return v / (math.pi * w0**3) / math.sqrt(c * c - d * d)


def phi(bath: BathParams, d: float) -> complex:
    return complex(g_real(bath, d), g_imag(bath, d)) / 2


def g_real_quadrature(bath: BathParams, d: float, *, tol: float = 1e-9,
                      return_error: bool = False):
    """G^R from its momentum integral, int k^(2s-1) J0(kd) [1 - cos(k v delta)] dk.

    Independent of the closed forms in :func:`g_real`.  Uses the bath's
    cutoff when one is set, otherwise integrates to infinity (convergent for
    ``d > 0``, and for ``d = 0`` when ``s = -1/2``).
    """
    if d == 0 and bath.s != -0.5 and bath.cutoff is None:
        raise CutoffRequiredError("on-site integral diverges without a cutoff")
    res = bessel_integral(2 * bath.s - 1, d, bath.vdelta, "1-cos", bath.cutoff, tol)
    pre = _prefactor(bath)
    out = QuadResult(pre * res.value, pre * res.error)
    return out if return_error else out.value


def g_imag_quadrature(bath: BathParams, d: float, *, contact_term: bool = False,
                      tol: float = 1e-9, return_error: bool = False):
    """G^I / i from the time-ordered commutator integral.

    Integrating the symmetrised commutator over 0 < t2 < t1 < delta gives

        g = -pre * int k^(2s-1) J0(kd) [k v delta - sin(k v delta)] dk.

    For ``s = -1/2`` that integral is evaluated as it stands.  For ``s = 0``
    and ``s = +1/2`` the k-v-delta piece (the equal-time "contact" term,
    ``-pre * v delta * int k^(2s) J0(kd) dk``) is left out by default, matching
    the derivative-form route that produces the closed forms; pass
    ``contact_term=True`` to add it back.  It equals ``-pre * v delta / d``
    for the Ohmic bath and vanishes (Abel-regularised) for the super-Ohmic one.
    """
    if d == 0:
        out = QuadResult(0.0, 0.0)
        return out if return_error else out.value
    pre = _prefactor(bath)
    c = bath.vdelta
    p = 2 * bath.s - 1
    if bath.s == -0.5:
        res = bessel_integral(p, d, c, "x-sin", bath.cutoff, tol)
        val, err = -pre * res.value, pre * res.error
    else:
        res = bessel_integral(p, d, c, "sin", bath.cutoff, tol)
        val, err = pre * res.value, pre * res.error
        if contact_term and bath.s == 0.0:
            ct = bessel_integral(0.0, d, c, "one", bath.cutoff, tol)
            val -= pre * c * ct.value
            err += pre * c * ct.error
    out = QuadResult(val, err)
    return out if return_error else out.value


def beta_of(bath: BathParams) -> float:
    """Fictitious inverse temperature, (1/2pi) (lambda/w0)^2 (w0 delta)^-(D+2s-2)."""
    w0 = bath.omega0
    return (bath.lam / w0) ** 2 / (2 * math.pi) * (w0 * bath.delta) ** (-(bath.D + 2 * bath.s - 2))


def coupling_scale(bath: BathParams) -> float:
    """lambda^2 / (2 beta) = pi w0^2 (w0 delta)^(D+2s-2); independent of lambda."""
    w0 = bath.omega0
    return math.pi * w0**2 * (w0 * bath.delta) ** (bath.D + 2 * bath.s - 2)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric complex couplings with E_S = sum_{i != j} J_ij s_i s_j.

    ``nn_bond`` is set for nearest-neighbour models: the energy of a single
    aligned pair, so that E_S = nn_bond * sum_<ij> s_i s_j.  ``pairs`` lists
    the coupled (i, j) pairs, i < j.
    """

    values: np.ndarray
    pairs: np.ndarray
    nn_bond: complex | None = None
    source: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def is_nn(self) -> bool:
        return self.nn_bond is not None

    @property
    def is_real(self) -> bool:
        return not np.any(self.values.imag)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def coupling_matrix(lattice: Lattice, bath: BathParams) -> CouplingMatrix:
    # unit positions are multiples of 1/2, so squared separations are exact keys
    pos = lattice.positions
    q = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    a = lattice.spec.a
    N = lattice.N
    scale = coupling_scale(bath)
    J = np.zeros((N, N), dtype=complex)
    cache: dict[float, complex] = {}
    for i in range(N):
        for j in range(i + 1, N):
            key = float(q[i, j])
            if key not in cache:
                cache[key] = scale * phi(bath, a * math.sqrt(key))
            J[i, j] = J[j, i] = cache[key]
    iu = np.triu_indices(N, k=1)
    nz = J[iu] != 0
    pairs = np.stack([iu[0][nz], iu[1][nz]], axis=1)
    return CouplingMatrix(
        values=_freeze(J),
        pairs=_freeze(pairs),
        source=f"bath:{bath.kind}",
        meta={"bath": bath, "beta": beta_of(bath), "vdelta": bath.vdelta},
    )


def nn_coupling_matrix(lattice: Lattice, J: complex) -> CouplingMatrix:
    """Nearest-neighbour model with bond energy ``J``.

    Pairs at separation ``a/sqrt(2)`` carry ``J_ij = J/2`` so that each
    bond contributes ``J s_i s_j`` to E_S (the double sum counts it twice).
    Negative real ``J`` is ferromagnetic.
    """
    N = lattice.N
    vals = np.zeros((N, N), dtype=complex)
    pairs = np.array([(i, j) for i, j, _ in neighbor_pairs(lattice)], dtype=np.int64).reshape(-1, 2)
    if J != 0:
        vals[pairs[:, 0], pairs[:, 1]] = J / 2
        vals[pairs[:, 1], pairs[:, 0]] = J / 2
    return CouplingMatrix(
        values=_freeze(vals),
        pairs=_freeze(pairs),
        nn_bond=complex(J),
        source="nearest-neighbour",
        meta={"J": complex(J)},
    )


def flip_probability(bath: BathParams) -> float:
    """Single-qubit flip probability p = (1 - exp[-(lambda^2/4) G^R_rr]) / 2."""
    return 0.5 * -math.expm1(-(bath.lam**2 / 4) * onsite_g_real(bath))


def flip_rate(bath: BathParams) -> float:
    """kappa with ln(1 - 2p) = -kappa * beta; independent of lambda."""
    return 0.5 * coupling_scale(bath) * onsite_g_real(bath)


def p_from_beta(beta: float, bath: BathParams) -> float:
    if beta < 0:
        raise ValueError("beta must be non-negative")
    return 0.5 * -math.expm1(-flip_rate(bath) * beta)


def beta_from_p(p: float, bath: BathParams) -> float:
    if not 0 <= p < 0.5:
        raise ValueError("flip probability must lie in [0, 1/2)")
    return -math.log1p(-2 * p) / flip_rate(bath)


def chi(lattice: Lattice, bath: BathParams) -> float:
    """Real prefactor exp[-(lambda^2/4) sum_i Phi_ii] of the evolution operator."""
    phi_rr = onsite_g_real(bath) / 2
    return math.exp(-(bath.lam**2 / 4) * lattice.N * phi_rr)
