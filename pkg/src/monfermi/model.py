"""Single-particle model: disordered tight-binding chain and its step propagator.

The lattice Hamiltonian is an L x L real symmetric matrix with unit hopping
between nearest neighbours (optionally also next-nearest neighbours) and a
random on-site potential h_i drawn uniformly from [-W, W].  Because the
potential is frozen for a whole trajectory, the unitary one-step propagator
exp(-i h dt) is computed once per disorder realization and reused.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

BOUNDARIES = ("periodic", "open")

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of one simulated system.

    Parameters
    ----------
    L : int
        Number of lattice sites.
    W : float
        Disorder strength; on-site potentials are uniform on [-W, W].
    gamma : float
        Measurement strength (rate) of the site-occupation monitoring.
    dt : float
        Trotter step size.
    boundary : str
        "periodic" or "open".
    nnn : bool
        Include next-nearest-neighbour hopping of unit amplitude.
    filling : int or None
        Particle number N; defaults to half filling L // 2.
    """

    L: int
    W: float = 0.0
    gamma: float = 0.0
    dt: float = 0.05
    boundary: str = "periodic"
    nnn: bool = False
    filling: int | None = None

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError(f"L must be positive, got {self.L}")
        if self.W < 0:
            raise ParameterError(f"W must be non-negative, got {self.W}")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be non-negative, got {self.gamma}")
        if self.dt <= 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.boundary not in BOUNDARIES:
            raise ParameterError(
                f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}"
            )
        if self.filling is None and self.L % 2:
            raise ParameterError(
                f"default half filling requires even L, got L={self.L}"
            )
        if self.filling is not None and not 1 <= self.filling <= self.L:
            raise ParameterError(
                f"filling must satisfy 1 <= N <= L, got N={self.filling}, L={self.L}"
            )

    @property
    def n_particles(self) -> int:
        return self.L // 2 if self.filling is None else self.filling


@dataclass(frozen=True)
class DisorderRealization:
    """One frozen sample of the on-site random potential."""

    h: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
        if self.h.ndim != 1:
            raise ParameterError("potential must be a 1D vector")


def sample_disorder(W: float, L: int, seed: int) -> DisorderRealization:
    """Draw L independent on-site potentials uniform on [-W, W].

    A counter-based generator (Philox) keyed directly by ``seed`` makes the
    sample reproducible regardless of how many other draws happened before;
    realization k of a sweep only needs its own seed.
    """
    if W < 0:
        raise ParameterError(f"W must be non-negative, got {W}")
    if L < 1:
        raise ParameterError(f"L must be positive, got {L}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    return DisorderRealization(h=rng.uniform(-W, W, size=L))


def build_hamiltonian(spec: ModelSpec, dis: DisorderRealization) -> np.ndarray:
    """Assemble the L x L single-particle hopping matrix.

    Unit entries at (i, i+-1), plus (i, i+-2) when ``spec.nnn``, with index
    arithmetic mod L for periodic boundaries and no wrap terms for open ones.
    The diagonal carries the disorder potential.
    """
    L = spec.L
    if dis.h.shape != (L,):
        raise ParameterError(
            f"potential length {dis.h.shape[0]} does not match L={L}"
        )
    ranges = [1, 2] if spec.nnn else [1]
    h_mat = np.diag(dis.h.astype(float))
    for d in ranges:
        for i in range(L):
            j = i + d
            if j >= L:
                if spec.boundary != "periodic":
                    continue
                j -= L
            if i == j:  # wrap collapses onto the diagonal on tiny rings
                continue
            h_mat[i, j] = 1.0
            h_mat[j, i] = 1.0
    return h_mat


def make_propagator(h_mat: np.ndarray, dt: float) -> np.ndarray:
    """Unitary step propagator exp(-i h dt) via eigendecomposition.

    Computed once per disorder realization; the potential is static so the
    same matrix drives every step of a trajectory.
    """
    h_mat = np.asarray(h_mat)
    if h_mat.ndim != 2 or h_mat.shape[0] != h_mat.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {h_mat.shape}")
    if not np.allclose(h_mat, h_mat.conj().T, atol=HERMITICITY_TOL, rtol=0.0):
        raise ParameterError("propagator requires a Hermitian matrix")
    evals, evecs = np.linalg.eigh(h_mat)
    phases = np.exp(-1j * evals * dt)
    return (evecs * phases) @ evecs.conj().T
