"""Pure Gaussian (Slater-determinant) states and their observables.

The state of N fermions on L sites is stored as a complex L x N matrix ``U``
whose orthonormal columns are the occupied single-particle orbitals:

    |psi> = prod_k ( sum_j U[j, k] c_j^dag ) |0>

Everything measurable follows from the correlation matrix D = U U^dag with
D[i, j] = <c_j^dag c_i>, which for a pure state is the rank-N projector onto
the occupied subspace.  (The index order is the transpose of the other common
convention; densities D[i, i] and the moduli used in the correlators are the
same either way.)  All functions here are pure: they never mutate their
inputs, so distinct trajectory workers can share code without locking.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateStateError, ParameterError

# Restricted-D eigenvalues are clamped away from {0, 1} before the entropy
# formula; the induced error is below 1e-12.
EIGENVALUE_CLIP = 1e-14

# |R_kk| below this (relative to the largest) marks a rank-deficient QR.
RANK_TOL = 1e-12


def neel_state(L: int) -> np.ndarray:
    """Orbital matrix of the half-filled Neel state (alternate sites occupied).

    Orbital k is the unit vector on site 2k, so the occupied sublattice starts
    at site 0 and the density pattern is (1, 0, 1, 0, ...).
    """
    if L < 2 or L % 2:
        raise ParameterError(f"Neel state requires even L >= 2, got {L}")
    N = L // 2
    U = np.zeros((L, N), dtype=complex)
    U[2 * np.arange(N), np.arange(N)] = 1.0
    return U


def correlation_matrix(U: np.ndarray) -> np.ndarray:
    """Two-point function matrix D = U U^dag, Hermitian with trace N."""
    return U @ U.conj().T


def block_entropy(block: np.ndarray) -> float:
    """Entropy (nats) from an already-restricted correlation block.

    The eigenvalues lam of the block give
    S = -sum lam ln lam + (1 - lam) ln(1 - lam).
    """
    lam = np.linalg.eigvalsh(block)
    lam = np.clip(lam.real, EIGENVALUE_CLIP, 1.0 - EIGENVALUE_CLIP)
    return float(-np.sum(lam * np.log(lam) + (1.0 - lam) * np.log(1.0 - lam)))


def entanglement_entropy(D: np.ndarray, sites) -> float:
    """Von Neumann entropy (nats) of the subsystem spanned by ``sites``."""
    L = D.shape[0]
    sites = np.asarray(sites, dtype=int)
    if sites.size == 0 or sites.size >= L:
        raise ParameterError(
            f"subsystem must be a non-empty proper subset, got {sites.size} of {L} sites"
        )
    return block_entropy(D[np.ix_(sites, sites)])


def entropy_profile(D: np.ndarray, cuts=None) -> np.ndarray:
    """Entropies of the contiguous left blocks {0..l-1} for each cut length l.

    ``cuts`` defaults to every bipartition 1..L-1.
    """
    L = D.shape[0]
    if cuts is None:
        cuts = range(1, L)
    return np.array([entanglement_entropy(D, np.arange(l)) for l in cuts])


def connected_correlation(D: np.ndarray, r: int, periodic: bool = True) -> float:
    """Density-density connected correlator C(r) = |D[i+r, i]|^2, site averaged.

    With periodic boundaries the average runs over all L reference sites with
    wrapped index arithmetic; otherwise over the L - r bulk pairs.
    """
    L = D.shape[0]
    if not 1 <= r <= L - 1:
        raise ParameterError(f"separation must satisfy 1 <= r <= L-1, got {r}")
    if periodic:
        idx = np.arange(L)
        vals = D[(idx + r) % L, idx]
    else:
        idx = np.arange(L - r)
        vals = D[idx + r, idx]
    return float(np.mean(np.abs(vals) ** 2))


def autocorrelation(U_early: np.ndarray, U_late: np.ndarray) -> float:
    """Site-averaged |[U(t+tau) U^dag(t)]_{ii}|^2 between two state snapshots."""
    if U_early.shape != U_late.shape:
        raise ParameterError(
            f"state shapes differ: {U_early.shape} vs {U_late.shape}"
        )
    diag = np.einsum("ik,ik->i", U_late, U_early.conj())
    return float(np.mean(np.abs(diag) ** 2))


def orbital_densities(U: np.ndarray) -> np.ndarray:
    """Per-orbital site densities |U[:, k]|^2, recentred for averaging.

    Each column density is cyclically shifted so its maximum sits at site
    L // 2; returns an (N, L) array.  These profiles depend on the orbital
    basis chosen inside the occupied subspace (only D is basis independent),
    but the evolution fixes that basis uniquely, so averaging them over
    realizations is well defined.
    """
    L = U.shape[0]
    dens = np.abs(U.T) ** 2
    out = np.empty_like(dens)
    center = L // 2
    for k, row in enumerate(dens):
        out[k] = np.roll(row, center - int(np.argmax(row)))
    return out


def renormalize(U: np.ndarray) -> np.ndarray:
    """Restore orthonormal columns via thin QR, keeping the column space.

    The decomposition is pinned to the unique representative with positive
    real diagonal of R, so repeated normalizations of the same trajectory are
    reproducible down to the phase of each orbital.
    """
    if not np.all(np.isfinite(U)):
        raise DegenerateStateError(
            "orbital matrix contains non-finite entries; evolution blew up"
        )
    Q, R = np.linalg.qr(U)
    diag = np.diagonal(R).copy()
    mags = np.abs(diag)
    if mags.min() <= RANK_TOL * max(mags.max(), 1.0):
        raise DegenerateStateError(
            "orbital matrix is numerically rank deficient; evolution blew up"
        )
    # Absorb the diagonal phases of R into Q so that R ends up with a
    # positive real diagonal; this pins the otherwise arbitrary column phases.
    return Q * (diag / mags)


def apply_step(
    U: np.ndarray,
    prop: np.ndarray,
    noise: np.ndarray,
    gamma: float,
    dt: float,
) -> np.ndarray:
    """One trotterized step of unitary evolution plus weak site monitoring.

    The orbital matrix is updated as U <- exp(M) exp(-i h dt) U where M is
    diagonal with M_ii = eta_i + (2 <n_i> - 1) gamma dt, the eta_i being this
    step's Gaussian measurement increments.  The occupations <n_i> = D_ii are
    taken from the state *before* the unitary half of the step; the exact
    many-body reference uses the same convention, so the two agree to machine
    precision rather than to O(dt).  Columns are re-orthonormalized afterwards.
    """
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (U.shape[0],):
        raise ParameterError(
            f"noise length {noise.shape} does not match L={U.shape[0]}"
        )
    densities = np.einsum("ik,ik->i", U, U.conj()).real
    U_new = prop @ U
    scale = np.exp(noise + (2.0 * densities - 1.0) * gamma * dt)
    U_new *= scale[:, None]
    return renormalize(U_new)
