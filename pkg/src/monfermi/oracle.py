"""Exact fixed-particle-number reference evolution for small systems.

The full many-body wavefunction lives in the C(L, N)-dimensional sector of
occupation bitstrings with N set bits.  The trotterized stochastic update is
applied literally: the sector propagator exp(-i H dt) followed by the
diagonal measurement factor, using the same pre-step occupation convention
as the orbital-matrix evolution, so the two must agree to machine precision
with shared noise.  This is a test oracle: clarity over speed, L <= ~12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ParameterError

DEFAULT_DIMENSION_CAP = 5000


@dataclass(frozen=True)
class FockBasis:
    """Canonical occupation basis of the (L, N) sector.

    Basis states are bitstrings with bit j = occupation of site j, listed in
    increasing integer value; ``occupations`` caches the (dim, L) 0/1 table.
    """

    L: int
    N: int
    states: np.ndarray = field(repr=False)
    occupations: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, state: int) -> int:
        i = int(np.searchsorted(self.states, state))
        if i >= self.dim or self.states[i] != state:
            raise ParameterError(f"bitstring {state:#x} is not in the sector")
        return i


def fock_basis(L: int, N: int, cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Enumerate the fixed-N sector, refusing dimensions above ``cap``."""
    if not 1 <= N <= L:
        raise ParameterError(f"need 1 <= N <= L, got N={N}, L={L}")
    dim = math.comb(L, N)
    if dim > cap:  # refuse before enumerating anything
        raise ParameterError(
            f"sector dimension {dim} exceeds cap {cap} (L={L}, N={N})"
        )
    states = sorted(
        sum(1 << j for j in sites) for sites in combinations(range(L), N)
    )
    states = np.array(states, dtype=np.int64)
    occ = (states[:, None] >> np.arange(L)[None, :]) & 1
    return FockBasis(L=L, N=N, states=states, occupations=occ.astype(np.int8))


@dataclass
class FockState:
    """Amplitude vector over a FockBasis, kept at unit norm."""

    basis: FockBasis
    amp: np.ndarray

    def normalized(self) -> "FockState":
        norm = np.linalg.norm(self.amp)
        if norm == 0:
            raise ParameterError("cannot normalize the zero vector")
        return FockState(self.basis, self.amp / norm)


def _hop_sign(state: int, i: int, j: int) -> int:
    """Fermionic sign of c_i^dag c_j acting on an occupation bitstring."""
    after_annihilate = state & ~(1 << j)
    crossings = bin(state & ((1 << j) - 1)).count("1") + bin(
        after_annihilate & ((1 << i) - 1)
    ).count("1")
    return -1 if crossings & 1 else 1


def sector_hamiltonian(basis: FockBasis, h_mat: np.ndarray) -> np.ndarray:
    """Many-body Hamiltonian restricted to the fixed-N sector.

    Built entry by entry from the single-particle matrix, so boundary
    conditions, longer-range hopping, and disorder all carry over for free.
    """
    h_mat = np.asarray(h_mat)
    L, dim = basis.L, basis.dim
    if h_mat.shape != (L, L):
        raise ParameterError(f"h_mat shape {h_mat.shape} does not match L={L}")
    H = np.zeros((dim, dim), dtype=complex)
    diag_pot = basis.occupations @ np.real(np.diagonal(h_mat))
    H[np.arange(dim), np.arange(dim)] = diag_pot
    hops = [
        (i, j)
        for i in range(L)
        for j in range(L)
        if i != j and h_mat[i, j] != 0
    ]
    for b, state in enumerate(map(int, basis.states)):
        for i, j in hops:
            if not (state >> j) & 1 or (state >> i) & 1:
                continue
            target = (state & ~(1 << j)) | (1 << i)
            a = basis.index_of(target)
            H[a, b] += h_mat[i, j] * _hop_sign(state, i, j)
    return H


def neel_fock(L: int) -> FockState:
    """Sector wavefunction of the Neel state (even sites occupied)."""
    if L % 2:
        raise ParameterError(f"Neel state requires even L, got {L}")
    basis = fock_basis(L, L // 2)
    amp = np.zeros(basis.dim, dtype=complex)
    amp[basis.index_of(sum(1 << j for j in range(0, L, 2)))] = 1.0
    return FockState(basis, amp)


def from_orbitals(U: np.ndarray, cap: int = DEFAULT_DIMENSION_CAP) -> FockState:
    """Expand a Slater determinant with orbital matrix U into the sector basis.

    The amplitude on a bitstring is the determinant of the rows of U at the
    occupied sites (sites ascending, orbitals in column order).
    """
    L, N = U.shape
    basis = fock_basis(L, N, cap=cap)
    amp = np.empty(basis.dim, dtype=complex)
    for b in range(basis.dim):
        rows = np.nonzero(basis.occupations[b])[0]
        amp[b] = np.linalg.det(U[rows, :])
    return FockState(basis, amp).normalized()


class ExactEvolver:
    """Caches the sector propagator for repeated trotterized steps."""

    def __init__(self, basis: FockBasis, h_mat: np.ndarray, dt: float):
        self.basis = basis
        self.dt = dt
        H = sector_hamiltonian(basis, h_mat)
        evals, evecs = np.linalg.eigh(H)
        self.propagator = (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T

    def step(
        self,
        state: FockState,
        noise: np.ndarray,
        gamma: float,
        n_convention: str = "pre",
    ) -> FockState:
        """Advance by one step: unitary, then measurement factor, then norm.

        ``n_convention`` selects where the occupations entering the
        deterministic drift are evaluated: "pre" (before the unitary, the
        production convention) or "post" (after it, kept only as a negative
        control for equivalence tests).
        """
        if n_convention not in ("pre", "post"):
            raise ParameterError(f"unknown convention {n_convention!r}")
        occ = self.basis.occupations
        probs = np.abs(state.amp) ** 2
        amp = self.propagator @ state.amp
        if n_convention == "post":
            probs = np.abs(amp) ** 2
            probs = probs / probs.sum()
        mean_n = probs @ occ
        site_weights = noise + (2.0 * mean_n - 1.0) * gamma * self.dt
        amp = amp * np.exp(occ @ site_weights)
        return FockState(state.basis, amp).normalized()


_evolver_cache: dict = {}


def exact_step(
    state: FockState,
    h_mat: np.ndarray,
    noise: np.ndarray,
    gamma: float,
    dt: float,
    n_convention: str = "pre",
) -> FockState:
    """One trotterized stochastic step on the exact sector wavefunction."""
    h_mat = np.asarray(h_mat)
    key = (state.basis.L, state.basis.N, float(dt), h_mat.tobytes())
    evolver = _evolver_cache.get(key)
    if evolver is None:
        evolver = ExactEvolver(state.basis, h_mat, dt)
        if len(_evolver_cache) > 8:
            _evolver_cache.clear()
        _evolver_cache[key] = evolver
    return evolver.step(state, np.asarray(noise, dtype=float), gamma, n_convention)


def correlation_matrix(state: FockState) -> np.ndarray:
    """Two-point function matrix by direct operator application.

    Entries follow the orbital-product convention D = U U^dag of the Gaussian
    module, i.e. D[i, j] = <c_j^dag c_i>; the two index orders are conjugate
    transposes of each other, so every derived observable agrees either way.
    """
    basis = state.basis
    L = basis.L
    occ = basis.occupations
    probs = np.abs(state.amp) ** 2
    D = np.zeros((L, L), dtype=complex)
    D[np.arange(L), np.arange(L)] = probs @ occ
    for b, bs in enumerate(map(int, basis.states)):
        if state.amp[b] == 0:
            continue
        for j in range(L):
            if not (bs >> j) & 1:
                continue
            for i in range(L):
                if i == j or (bs >> i) & 1:
                    continue
                target = (bs & ~(1 << j)) | (1 << i)
                a = basis.index_of(target)
                D[j, i] += (
                    np.conj(state.amp[a]) * state.amp[b] * _hop_sign(bs, i, j)
                )
    return D


def _cut_entropy(state: FockState, l: int) -> float:
    """Entanglement entropy of sites {0..l-1} from the Schmidt spectrum.

    Reshaping the amplitudes into a (left config) x (right config) matrix is
    sign-free here: occupied sites are listed in ascending order, so a left
    block factors out of every basis monomial without operator crossings.
    """
    basis = state.basis
    left_mask = (1 << l) - 1
    left_ids: dict[int, int] = {}
    right_ids: dict[int, int] = {}
    entries = []
    for b, bs in enumerate(map(int, basis.states)):
        lo = bs & left_mask
        hi = bs >> l
        li = left_ids.setdefault(lo, len(left_ids))
        ri = right_ids.setdefault(hi, len(right_ids))
        entries.append((li, ri, state.amp[b]))
    psi = np.zeros((len(left_ids), len(right_ids)), dtype=complex)
    for li, ri, a in entries:
        psi[li, ri] = a
    lam = np.linalg.svd(psi, compute_uv=False) ** 2
    lam = lam[lam > 1e-16]
    return float(-np.sum(lam * np.log(lam)))


@dataclass
class ExactObservables:
    """Brute-force observables of a sector wavefunction."""

    D: np.ndarray
    entropies: np.ndarray  # S(l) for contiguous left cuts l = 1..L-1
    nn: np.ndarray  # <n_i n_j>


def exact_observables(state: FockState) -> ExactObservables:
    basis = state.basis
    probs = np.abs(state.amp) ** 2
    occ = basis.occupations.astype(float)
    nn = (occ * probs[:, None]).T @ occ
    entropies = np.array(
        [_cut_entropy(state, l) for l in range(1, basis.L)]
    )
    return ExactObservables(
        D=correlation_matrix(state), entropies=entropies, nn=nn
    )
