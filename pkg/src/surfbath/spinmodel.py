"""Exact sums over the star-constrained configuration space.

A configuration is a bit mask of flipped qubits relative to the all-up
x-basis state: bit ``i`` set means ``s_i = -1``.  The allowed
configurations (every star eigenvalue +1) are generated by XOR-ing subsets
of plaquette masks, plus an optional logical-Z string that selects the
second coset.  Subset index ``t`` is mapped to a configuration through its
reflected Gray code, so consecutive configurations differ by one generator.

Enumeration is split into fixed chunks of ``CHUNK`` subset indices.  Each
chunk is processed independently (optionally on a thread pool) and chunk
results are merged in index order, so every output is bit-identical for
any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, TypeVar

import numpy as np

from .bath import CouplingMatrix
from .lattice import Lattice, masks_to_array, overlap_parity, popcount

SpinConfig = int

CHUNK = 1 << 16
MAX_GENERATORS = 30
BRUTE_FORCE_MAX_N = 25

T = TypeVar("T")


class EnsembleError(RuntimeError):
    """Internal consistency failure of the restricted ensemble."""


class DegenerateAmplitudeError(ZeroDivisionError):
    """A = 0, so the fidelity is undefined."""


def gf2_rank(masks: Sequence[int]) -> int:
    basis: dict[int, int] = {}
    for v in masks:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return len(basis)


@dataclass(frozen=True)
class RestrictedEnsemble:
    """Flip masks spanned by ``generators`` and shifted by ``coset_shift``."""

    N: int
    generators: tuple[int, ...]
    coset_shift: int
    gamma_x: int

    @property
    def all_generators(self) -> tuple[int, ...]:
        return self.generators + (self.coset_shift,)

    @property
    def bits(self) -> int:
        return len(self.generators) + 1

    @property
    def count(self) -> int:
        return 1 << self.bits

    @property
    def n_chunks(self) -> int:
        return max(1, self.count // CHUNK)

    def chunk_range(self, index: int) -> tuple[int, int]:
        lo = index * CHUNK
        return lo, min(lo + CHUNK, self.count)

    def masks(self, lo: int, hi: int) -> np.ndarray:
        """Flip masks (uint64) for subset indices ``lo <= t < hi`` in Gray order."""
        t = np.arange(lo, hi, dtype=np.uint64)
        gray = t ^ (t >> np.uint64(1))
        gens = masks_to_array(self.all_generators)
        out = np.zeros(hi - lo, dtype=np.uint64)
        for b, g in enumerate(gens):
            hit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
            out[hit] ^= g
        return out

    def __iter__(self) -> Iterator[int]:
        for c in range(self.n_chunks):
            yield from (int(x) for x in self.masks(*self.chunk_range(c)))


def build_ensemble(lattice: Lattice) -> RestrictedEnsemble:
    gens = tuple(lattice.plaquettes)
    if len(gens) + 1 > MAX_GENERATORS:
        raise ValueError(
            f"{len(gens) + 1} generator bits exceed the exhaustive-enumeration limit {MAX_GENERATORS}"
        )
    if lattice.N > 64:
        raise ValueError("enumeration supports at most 64 qubits")
    if gf2_rank(gens + (lattice.gamma_z,)) != len(gens) + 1:
        raise EnsembleError("plaquette generators and logical Z are not independent")
    for g in gens + (lattice.gamma_z,):
        if any(overlap_parity(g, s) for s in lattice.stars):
            raise EnsembleError("a generator violates a star constraint")
    return RestrictedEnsemble(
        N=lattice.N, generators=gens, coset_shift=lattice.gamma_z, gamma_x=lattice.gamma_x
    )


def map_chunks(ens: RestrictedEnsemble, fn: Callable[[np.ndarray], T], workers: int = 1) -> list[T]:
    """Apply ``fn`` to the mask array of every chunk; results in chunk order."""
    ranges = [ens.chunk_range(c) for c in range(ens.n_chunks)]
    work = lambda r: fn(ens.masks(*r))  # noqa: E731
    if workers <= 1 or len(ranges) == 1:
        return [work(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, ranges))


def spins_of(masks: np.ndarray, N: int) -> np.ndarray:
    """(C, N) array of +-1 spins."""
    bits = (masks[:, None] >> np.arange(N, dtype=np.uint64)) & np.uint64(1)
    return 1.0 - 2.0 * bits.astype(np.float64)


def parity_of(masks: np.ndarray, sel: int) -> np.ndarray:
    """+1 / -1 according to the parity of ``mask & sel``."""
    par = np.bitwise_count(masks & np.uint64(sel)) & 1
    return 1 - 2 * par.astype(np.int64)


def antiparallel_counts(masks: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    k = np.zeros(len(masks), dtype=np.uint64)
    one = np.uint64(1)
    for i, j in pairs:
        k += ((masks >> np.uint64(i)) ^ (masks >> np.uint64(j))) & one
    return k.astype(np.int64)


def chunk_energies(masks: np.ndarray, couplings: CouplingMatrix) -> np.ndarray:
    """Energies E_S = sum_{i != j} J_ij s_i s_j for each mask."""
    if couplings.is_nn:
        P = len(couplings.pairs)
        return couplings.nn_bond * (P - 2 * antiparallel_counts(masks, couplings.pairs))
    s = spins_of(masks, couplings.N)
    J = couplings.values
    re = np.einsum("ci,ci->c", s @ J.real, s)
    if couplings.is_real:
        return re.astype(complex)
    return re + 1j * np.einsum("ci,ci->c", s @ J.imag, s)


def energy(config: SpinConfig, couplings: CouplingMatrix) -> complex:
    return complex(chunk_energies(np.array([config], dtype=np.uint64), couplings)[0])


def is_allowed(config: SpinConfig, lattice: Lattice) -> bool:
    return not any(overlap_parity(config, s) for s in lattice.stars)


def logical_sign(config: SpinConfig, gamma_x: int) -> int:
    return -1 if popcount(config & gamma_x) & 1 else 1


@dataclass(frozen=True)
class AmplitudeResult:
    """Unnormalised amplitudes.

    ``A`` and ``B`` carry ``exp(beta * energy_offset)`` and omit the common
    factor chi / 2^N * 2^{N_star}; both cancel in the fidelity.
    """

    A: complex
    B: complex
    beta: float
    energy_offset: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def fidelity(self) -> float:
        return fidelity(self)


def fidelity(result: AmplitudeResult) -> float:
    if result.A == 0:
        raise DegenerateAmplitudeError(f"A = 0 at beta = {result.beta!r}")
    r = abs(result.B) / abs(result.A)
    return 1.0 / math.sqrt(1.0 + r * r)


_OMITTED = "chi/2^N and <S|G^2|S> = 2^N_star omitted (cancel in B/A)"


def _weighted_sums(E: np.ndarray, sign: np.ndarray, beta: float, offset: float):
    w = np.exp(-beta * (E - offset))
    if not np.all(np.isfinite(w)):
        raise OverflowError("Boltzmann weight overflow after offsetting")
    sw = sign * w
    return (
        math.fsum(w.real), math.fsum(w.imag),
        math.fsum(sw.real), math.fsum(sw.imag),
    )


def _merge(parts, beta, offset, prefactor, meta) -> AmplitudeResult:
    cols = list(zip(*parts))
    ar, ai, br, bi = (math.fsum(c) for c in cols)
    return AmplitudeResult(
        A=prefactor * complex(ar, ai),
        B=prefactor * complex(br, bi),
        beta=float(beta),
        energy_offset=float(offset),
        meta=meta,
    )


@dataclass(frozen=True)
class EnergyTable:
    """Cached per-chunk energies and logical signs of an ensemble."""

    energies: tuple[np.ndarray, ...]
    signs: tuple[np.ndarray, ...]
    min_real: float


def energy_table(ens: RestrictedEnsemble, couplings: CouplingMatrix, workers: int = 1) -> EnergyTable:
    if couplings.N != ens.N:
        raise ValueError("coupling matrix and ensemble sizes differ")

    def fn(masks):
        return chunk_energies(masks, couplings), parity_of(masks, ens.gamma_x)

    parts = map_chunks(ens, fn, workers)
    E = tuple(p[0] for p in parts)
    S = tuple(p[1] for p in parts)
    return EnergyTable(E, S, float(min(e.real.min() for e in E)))


def amplitudes(
    lattice: Lattice,
    ensemble: RestrictedEnsemble | None,
    couplings: CouplingMatrix,
    beta: float,
    *,
    offset: float | None = None,
    prefactor: float = 1.0,
    workers: int = 1,
    table: EnergyTable | None = None,
) -> AmplitudeResult:
    """A = sum_S w(S), B = sum_S chi_X(S) w(S), w = exp(-beta (E_S - offset)).

    ``offset`` defaults to the smallest real energy in the ensemble when
    ``beta > 0``.  ``prefactor`` multiplies both sums (for checks that the
    fidelity does not depend on it).
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if ensemble is None:
        ensemble = build_ensemble(lattice)
    if table is None:
        table = energy_table(ensemble, couplings, workers)
    if offset is None:
        offset = table.min_real if beta > 0 else 0.0
    parts = [
        _weighted_sums(E, s, beta, offset) for E, s in zip(table.energies, table.signs)
    ]
    return _merge(parts, beta, offset, prefactor, {"omitted": _OMITTED, "route": "generators"})


@dataclass(frozen=True)
class DosHistogram:
    """Degeneracies g+/g- keyed by the number k of antiparallel NN pairs.

    Energy of key k is ``nn_bond * (n_pairs - 2 k)``.
    """

    g_plus: np.ndarray
    g_minus: np.ndarray
    n_pairs: int

    @property
    def keys(self) -> np.ndarray:
        return np.arange(len(self.g_plus))

    @property
    def total(self) -> int:
        return int(self.g_plus.sum() + self.g_minus.sum())

    def energies(self, J: complex) -> np.ndarray:
        return J * (self.n_pairs - 2 * self.keys)

    def amplitudes(self, J: complex, beta: float, *, offset: float | None = None,
                   prefactor: float = 1.0) -> AmplitudeResult:
        if beta < 0:
            raise ValueError("beta must be non-negative")
        occupied = (self.g_plus + self.g_minus) > 0
        E = self.energies(J)
        if offset is None:
            offset = float(E.real[occupied].min()) if beta > 0 else 0.0
        w = np.exp(-beta * (E[occupied] - offset))
        if not np.all(np.isfinite(w)):
            raise OverflowError("Boltzmann weight overflow after offsetting")
        gp = self.g_plus[occupied].astype(float)
        gm = self.g_minus[occupied].astype(float)
        a, b = (gp + gm) * w, (gp - gm) * w
        return AmplitudeResult(
            A=prefactor * complex(math.fsum(a.real), math.fsum(a.imag)),
            B=prefactor * complex(math.fsum(b.real), math.fsum(b.imag)),
            beta=float(beta),
            energy_offset=float(offset),
            meta={"omitted": _OMITTED, "route": "dos"},
        )


def density_of_states(
    lattice: Lattice,
    ensemble: RestrictedEnsemble | None,
    couplings: CouplingMatrix,
    workers: int = 1,
) -> DosHistogram:
    if not couplings.is_nn:
        raise ValueError("density of states needs a nearest-neighbour coupling matrix")
    if ensemble is None:
        ensemble = build_ensemble(lattice)
    pairs = couplings.pairs
    P = len(pairs)

    def fn(masks):
        k = antiparallel_counts(masks, pairs)
        sign = parity_of(masks, ensemble.gamma_x)
        return (
            np.bincount(k[sign > 0], minlength=P + 1),
            np.bincount(k[sign < 0], minlength=P + 1),
        )

    parts = map_chunks(ensemble, fn, workers)
    gp = np.sum([p[0] for p in parts], axis=0).astype(np.int64)
    gm = np.sum([p[1] for p in parts], axis=0).astype(np.int64)
    return DosHistogram(gp, gm, P)


def fidelity_sweep(
    lattice: Lattice,
    couplings: CouplingMatrix,
    beta_grid: Sequence[float],
    *,
    workers: int = 1,
    ensemble: RestrictedEnsemble | None = None,
) -> list[tuple[float, AmplitudeResult]]:
    betas = [float(b) for b in beta_grid]
    if not betas:
        raise ValueError("empty beta grid")
    if any(b < 0 for b in betas):
        raise ValueError("beta must be non-negative")
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("beta grid must be sorted ascending")
    if ensemble is None:
        ensemble = build_ensemble(lattice)
    if couplings.is_nn:
        dos = density_of_states(lattice, ensemble, couplings, workers)
        return [(b, dos.amplitudes(couplings.nn_bond, b)) for b in betas]
    table = energy_table(ensemble, couplings, workers)
    return [(b, amplitudes(lattice, ensemble, couplings, b, table=table)) for b in betas]


def brute_force_amplitudes(
    lattice: Lattice, couplings: CouplingMatrix, beta: float, *, offset: float | None = None
) -> AmplitudeResult:
    """Reference sums over all 2^N configurations with an explicit star filter.

    Energies come from the dense matrix ``s^T J s``; nothing is shared with
    the generator route except the lattice masks.
    """
    N = lattice.N
    if N > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to N <= {BRUTE_FORCE_MAX_N}, got {N}")
    stars = masks_to_array(lattice.stars)
    J = np.asarray(couplings.values)
    Es, signs = [], []
    total = 1 << N
    for lo in range(0, total, CHUNK):
        cfg = np.arange(lo, min(lo + CHUNK, total), dtype=np.uint64)
        ok = np.ones(len(cfg), dtype=bool)
        for st in stars:
            ok &= parity_of(cfg, int(st)) > 0
        cfg = cfg[ok]
        if not len(cfg):
            continue
        s = spins_of(cfg, N)
        Es.append(np.einsum("ci,ij,cj->c", s, J, s))
        signs.append(parity_of(cfg, lattice.gamma_x))
    E = np.concatenate(Es)
    sign = np.concatenate(signs)
    if offset is None:
        offset = float(E.real.min()) if beta > 0 else 0.0
    parts = [_weighted_sums(E, sign, beta, offset)]
    meta = {"omitted": _OMITTED, "route": "brute-force", "count": int(len(E))}
    return _merge(parts, beta, offset, 1.0, meta)
