"""Trajectory driver and ensemble orchestration.

A single trajectory evolves a Gaussian orbital matrix under the trotterized
stochastic update (unitary hop + measurement row scaling + QR), recording
entanglement entropies, equal-time correlations, an autocorrelation series
against the first post-saturation sample, and the final orbital densities.
Ensembles fan out over (grid cell, disorder realization, noise stream) work
units that are embarrassingly parallel and individually replayable.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .errors import DegenerateStateError, ParameterError
from .gaussian import (
    apply_step,
    autocorrelation,
    block_entropy,
    connected_correlation,
    correlation_matrix,
    entanglement_entropy,
    neel_state,
    orbital_densities,
)
from .model import DisorderRealization, ModelSpec, build_hamiltonian, make_propagator, sample_disorder

CHECKPOINT_VERSION = 1
UNIT_CACHE_VERSION = 1
TRACE_TOL = 1e-8

# spawn-key tags keep the disorder stream and the measurement-noise streams
# of the same unit statistically independent
_DISORDER_TAG = 0
_NOISE_TAG = 1

_TIME_FUZZ = 1e-9


@dataclass(frozen=True)
class NoiseSource:
    """Replayable per-trajectory Gaussian noise stream.

    The stream is keyed by (master_seed, cell, disorder index, trajectory
    index); each evolution step gets its own counter block so draws for step
    k never depend on how many draws earlier steps consumed.
    """

    master_seed: int
    stream: tuple  # (disorder index, trajectory index)
    L: int
    cell: int = 0

    def __post_init__(self):
        d_idx, t_idx = self.stream
        if d_idx < 0 or t_idx < 0 or self.cell < 0:
            raise ParameterError("noise stream indices must be non-negative")
        if self.L < 1:
            raise ParameterError("noise vector length must be at least 1")
        if self.master_seed < 0:
            raise ParameterError("master_seed must be non-negative")


@lru_cache(maxsize=None)
def _philox_key(master_seed: int, cell: int, d_idx: int, t_idx: int) -> tuple:
    ss = np.random.SeedSequence(
        master_seed, spawn_key=(cell, d_idx, t_idx, _NOISE_TAG)
    )
    k = ss.generate_state(2, np.uint64)
    return (int(k[0]), int(k[1]))


def disorder_seed(master_seed: int, cell: int, d_idx: int) -> int:
    """Derive the seed for disorder realization d_idx of a grid cell.

    Lives in a spawn-key branch disjoint from every noise stream, so disorder
    and measurement noise are independent by construction.
    """
    ss = np.random.SeedSequence(
        master_seed, spawn_key=(cell, d_idx, 0, _DISORDER_TAG)
    )
    return int(ss.generate_state(1, np.uint64)[0])


def generate_noise(src: NoiseSource, step: int, gamma: float, dt: float) -> np.ndarray:
    """L i.i.d. Gaussian draws with mean 0 and variance gamma*dt for one step.

    Reproducible from (master_seed, stream, step) alone: the counter-based
    generator is positioned at a per-step offset, so any step of any
    trajectory can be regenerated without replaying its predecessors.
    """
    if gamma < 0:
        raise ParameterError("gamma must be non-negative")
    if gamma == 0.0:
        return np.zeros(src.L)
    key = _philox_key(src.master_seed, src.cell, src.stream[0], src.stream[1])
    bitgen = np.random.Philox(
        key=np.array(key, dtype=np.uint64), counter=step << 192
    )
    rng = np.random.Generator(bitgen)
    return rng.normal(0.0, math.sqrt(gamma * dt), size=src.L)


@dataclass(frozen=True)
class EvolutionSchedule:
    """Timing plan: total time, burn-in, sampling period, and step size."""

    t_total: float
    t_sat: float
    record_interval: float
    dt: float = 0.05

    def __post_init__(self):
        if self.dt <= 0:
            raise ParameterError("dt must be positive")
        if self.t_total < 0:
            raise ParameterError("t_total must be non-negative")
        if self.t_sat < 0:
            raise ParameterError("t_sat must be non-negative")
        if self.t_total > 0 and self.t_sat >= self.t_total:
            raise ParameterError("t_sat must be smaller than t_total")
        if self.record_interval < self.dt - _TIME_FUZZ:
            raise ParameterError("record_interval must be at least dt")
        ratio = self.record_interval / self.dt
        if abs(ratio - round(ratio)) > 1e-6:
            raise ParameterError(
                "record_interval must be an integer multiple of dt"
            )

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_total / self.dt - _TIME_FUZZ))

    @property
    def record_every(self) -> int:
        return max(1, int(round(self.record_interval / self.dt)))


@dataclass
class TrajectoryRecord:
    """Observables sampled along one trajectory, one row per instant."""

    times: np.ndarray  # (n_rec,)
    cuts: np.ndarray  # (n_cuts,) subsystem lengths
    entropy_profiles: np.ndarray  # (n_rec, n_cuts)
    corr_r: Optional[np.ndarray] = None  # (n_r,) separations
    corr_samples: Optional[np.ndarray] = None  # (n_rec, n_r)
    autocorr_tau: Optional[np.ndarray] = None  # (n_tau,) lags from reference
    autocorr: Optional[np.ndarray] = None  # (n_tau,)
    orbital_snapshot: Optional[np.ndarray] = None  # (L,) final recentered densities
    full_cut_profile: Optional[np.ndarray] = None  # (L-1,) post-burn-in mean S(l)
    final_time: float = 0.0


def save_checkpoint(path: str, U: np.ndarray, step: int, src: NoiseSource) -> None:
    """Write a resumable trajectory snapshot; round-trips bit-exactly.

    The noise stream position is the step index itself (per-step counter
    blocks), stored alongside the stream identity for validation on load.
    """
    tmp_fd, tmp_path = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp"
    )
    try:
        with os.fdopen(tmp_fd, "wb") as fh:
            np.savez(
                fh,
                version=np.int64(CHECKPOINT_VERSION),
                U=U,
                step=np.int64(step),
                master_seed=np.uint64(src.master_seed),
                cell=np.int64(src.cell),
                stream=np.array(src.stream, dtype=np.int64),
            )
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_checkpoint(path: str):
    """Read a snapshot written by save_checkpoint -> (U, step, meta dict)."""
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ParameterError(
                f"unsupported checkpoint version {version} "
                f"(expected {CHECKPOINT_VERSION})"
            )
        meta = {
            "master_seed": int(data["master_seed"]),
            "cell": int(data["cell"]),
            "stream": tuple(int(x) for x in data["stream"]),
        }
        return data["U"].copy(), int(data["step"]), meta


def _entropy_row(U, D, cuts):
    if D is not None:
        return np.array([entanglement_entropy(D, range(l)) for l in cuts])
    # without a full D, restrict U first: the left l x l block of D costs
    # l^2 N instead of L^2 N
    out = np.empty(len(cuts))
    for i, l in enumerate(cuts):
        out[i] = block_entropy(U[:l] @ U[:l].conj().T)
    return out


def run_trajectory(
    spec: ModelSpec,
    dis: DisorderRealization,
    sched: EvolutionSchedule,
    src: NoiseSource,
    *,
    cuts: Optional[Sequence[int]] = None,
    record_corr: bool = False,
    record_autocorr: bool = False,
    record_profile: bool = False,
    checkpoint_path: Optional[str] = None,
    checkpoint_every: Optional[int] = None,
    resume_from: Optional[str] = None,
) -> TrajectoryRecord:
    """Evolve one trajectory from the alternating-occupation product state.

    Records at t=0, every record_interval, and at the final step. The
    autocorrelation reference is the first recorded instant at or after
    t_sat. When resume_from names a checkpoint, evolution continues from the
    stored (U, step) and only subsequent instants appear in the record;
    because noise is keyed per step, the continuation is bit-identical to the
    uninterrupted run. Raises DegenerateStateError if renormalization loses
    rank or particle number drifts, leaving the caller to count the abort.
    """
    L = spec.L
    if src.L != L:
        raise ParameterError("noise source length does not match lattice size")
    if abs(spec.dt - sched.dt) > _TIME_FUZZ:
        raise ParameterError("model dt and schedule dt disagree")
    if dis.h.shape[0] != L:
        raise ParameterError("disorder realization length does not match L")
    if cuts is None:
        cuts = [L // 2]
    cuts = np.asarray(sorted(cuts), dtype=np.int64)
    if len(cuts) == 0 or cuts[0] < 1 or cuts[-1] > L - 1:
        raise ParameterError("entropy cuts must lie in [1, L-1]")

    h_mat = build_hamiltonian(spec, dis)
    prop = make_propagator(h_mat, sched.dt)
    n_steps = sched.n_steps
    every = sched.record_every
    N = spec.n_particles
    need_full_D = record_corr or record_profile
    r_values = np.arange(1, L // 2 + 1) if record_corr else None
    all_cuts = np.arange(1, L) if record_profile else None

    if resume_from is not None:
        U, step0, meta = load_checkpoint(resume_from)
        if (
            meta["stream"] != tuple(src.stream)
            or meta["cell"] != src.cell
            or meta["master_seed"] != src.master_seed
        ):
            raise ParameterError("checkpoint belongs to a different noise stream")
        if U.shape != (L, N):
            raise ParameterError("checkpoint state shape does not match spec")
    else:
        U = neel_state(L)
        step0 = 0

    times, s_rows, c_rows = [], [], []
    tau_list, auto_list = [], []
    profile_sum = np.zeros(L - 1) if record_profile else None
    profile_count = 0
    U_ref = None
    ref_time = 0.0

    def record(step_idx: int):
        nonlocal U_ref, ref_time, profile_count
        t = step_idx * sched.dt
        trace = float(np.sum(np.abs(U) ** 2))
        if abs(trace - N) > TRACE_TOL:
            raise DegenerateStateError(
                f"particle number drifted to {trace:.12g} (expected {N}) "
                f"at t={t:.6g}"
            )
        D = correlation_matrix(U) if need_full_D else None
        times.append(t)
        s_rows.append(_entropy_row(U, D, cuts))
        if record_corr:
            c_rows.append(
                np.array(
                    [
                        connected_correlation(D, r, periodic=spec.boundary == "periodic")
                        for r in r_values
                    ]
                )
            )
        post_sat = t >= sched.t_sat - _TIME_FUZZ
        if record_profile and post_sat:
            profile_sum[:] += np.array(
                [entanglement_entropy(D, range(l)) for l in all_cuts]
            )
            profile_count += 1
        if record_autocorr and post_sat:
            if U_ref is None:
                U_ref = U.copy()
                ref_time = t
                tau_list.append(0.0)
                auto_list.append(autocorrelation(U_ref, U_ref))
            else:
                tau_list.append(t - ref_time)
                auto_list.append(autocorrelation(U_ref, U))

    if step0 == 0:
        record(0)
    for k in range(step0, n_steps):
        noise = generate_noise(src, k, spec.gamma, sched.dt)
        U = apply_step(U, prop, noise, spec.gamma, sched.dt)
        k_next = k + 1
        if k_next % every == 0 or k_next == n_steps:
            record(k_next)
        if (
            checkpoint_path is not None
            and checkpoint_every is not None
            and k_next % checkpoint_every == 0
        ):
            save_checkpoint(checkpoint_path, U, k_next, src)

    snapshot = orbital_densities(U).mean(axis=0)
    profile = None
    if record_profile and profile_count > 0:
        profile = profile_sum / profile_count
    return TrajectoryRecord(
        times=np.array(times),
        cuts=cuts,
        entropy_profiles=np.array(s_rows),
        corr_r=r_values,
        corr_samples=np.array(c_rows) if record_corr else None,
        autocorr_tau=np.array(tau_list) if record_autocorr else None,
        autocorr=np.array(auto_list) if record_autocorr else None,
        orbital_snapshot=snapshot,
        full_cut_profile=profile,
        final_time=n_steps * sched.dt,
    )


def saturation_average(rec: TrajectoryRecord, sched: EvolutionSchedule) -> np.ndarray:
    """Per-cut time average of S over recorded instants at or after t_sat."""
    mask = rec.times >= sched.t_sat - _TIME_FUZZ
    if int(mask.sum()) < 2:
        raise ParameterError(
            "need at least 2 recorded samples after t_sat for a saturation average"
        )
    return rec.entropy_profiles[mask].mean(axis=0)


@dataclass
class TrajectorySummary:
    """Per-unit reduction of a TrajectoryRecord (saturation averages)."""

    cuts: np.ndarray
    s_inf: np.ndarray
    corr_r: np.ndarray  # empty when correlations were not recorded
    corr_inf: np.ndarray
    autocorr_tau: np.ndarray  # empty when autocorrelation was not recorded
    autocorr: np.ndarray
    orbital: np.ndarray
    profile: np.ndarray  # empty when the full cut profile was not recorded


def _summarize(rec: TrajectoryRecord, sched: EvolutionSchedule) -> TrajectorySummary:
    s_inf = saturation_average(rec, sched)
    mask = rec.times >= sched.t_sat - _TIME_FUZZ
    if rec.corr_samples is not None:
        corr_r = rec.corr_r
        corr_inf = rec.corr_samples[mask].mean(axis=0)
    else:
        corr_r = np.array([], dtype=np.int64)
        corr_inf = np.array([])
    if rec.autocorr is not None:
        tau, auto = rec.autocorr_tau, rec.autocorr
    else:
        tau, auto = np.array([]), np.array([])
    profile = rec.full_cut_profile
    if profile is None:
        profile = np.array([])
    return TrajectorySummary(
        cuts=rec.cuts,
        s_inf=s_inf,
        corr_r=corr_r,
        corr_inf=corr_inf,
        autocorr_tau=tau,
        autocorr=auto,
        orbital=rec.orbital_snapshot,
        profile=profile,
    )


@dataclass(frozen=True)
class EnsembleStats:
    """One aggregated observable value for a (gamma, W, L) grid cell."""

    gamma: float
    W: float
    L: int
    observable: str  # "entropy" | "correlation" | "autocorr" | "orbital" | "profile"
    index: float  # cut l, separation r, lag tau, or site offset from L//2
    mean: float
    stderr: float  # NaN when n_samples < 2
    n_samples: int


@dataclass
class EnsembleResult:
    stats: list  # list[EnsembleStats]
    n_units: int
    n_aborted: int
    aborted_units: list  # list of (cell, disorder index, trajectory index)

    def select(self, observable: str, **key) -> list:
        """Filter stats rows by observable and any of gamma/W/L/index."""
        rows = [s for s in self.stats if s.observable == observable]
        for name, val in key.items():
            rows = [s for s in rows if getattr(s, name) == val]
        return rows


def _unit_cache_path(cache_dir: str, cell: int, d_idx: int, t_idx: int) -> str:
    return os.path.join(cache_dir, f"unit_c{cell}_d{d_idx}_t{t_idx}.npz")


def _save_unit(path: str, summary: Optional[TrajectorySummary], tag: str) -> None:
    payload = {
        "version": np.int64(UNIT_CACHE_VERSION),
        "tag": np.str_(tag),
        "aborted": np.bool_(summary is None),
    }
    if summary is not None:
        payload.update(
            cuts=summary.cuts,
            s_inf=summary.s_inf,
            corr_r=summary.corr_r,
            corr_inf=summary.corr_inf,
            autocorr_tau=summary.autocorr_tau,
            autocorr=summary.autocorr,
            orbital=summary.orbital,
            profile=summary.profile,
        )
    tmp_fd, tmp_path = tempfile.mkstemp(
        dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp"
    )
    try:
        with os.fdopen(tmp_fd, "wb") as fh:
            np.savez(fh, **payload)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def _load_unit(path: str, tag: str) -> Optional[TrajectorySummary]:
    with np.load(path) as data:
        if int(data["version"]) != UNIT_CACHE_VERSION:
            raise ParameterError(f"incompatible cached unit file {path}")
        if str(data["tag"]) != tag:
            raise ParameterError(
                f"cached unit file {path} belongs to a different run configuration"
            )
        if bool(data["aborted"]):
            return None
        return TrajectorySummary(
            cuts=data["cuts"],
            s_inf=data["s_inf"],
            corr_r=data["corr_r"],
            corr_inf=data["corr_inf"],
            autocorr_tau=data["autocorr_tau"],
            autocorr=data["autocorr"],
            orbital=data["orbital"],
            profile=data["profile"],
        )


def _run_unit(
    spec: ModelSpec,
    sched: EvolutionSchedule,
    master_seed: int,
    cell: int,
    d_idx: int,
    t_idx: int,
    cuts,
    record_corr: bool,
    record_autocorr: bool,
    record_profile: bool,
    cache_dir: Optional[str],
    cache_tag: str,
):
    """Work unit: one (cell, disorder, trajectory) triple -> summary or None."""
    if cache_dir is not None:
        path = _unit_cache_path(cache_dir, cell, d_idx, t_idx)
        if os.path.exists(path):
            return _load_unit(path, cache_tag)
    dis = sample_disorder(spec.W, spec.L, disorder_seed(master_seed, cell, d_idx))
    src = NoiseSource(master_seed=master_seed, stream=(d_idx, t_idx), L=spec.L, cell=cell)
    try:
        rec = run_trajectory(
            spec,
            dis,
            sched,
            src,
            cuts=cuts,
            record_corr=record_corr,
            record_autocorr=record_autocorr,
            record_profile=record_profile,
        )
        summary = _summarize(rec, sched)
    except DegenerateStateError:
        summary = None
    if cache_dir is not None:
        _save_unit(path, summary, cache_tag)
    return summary


def _mean_stderr(values: np.ndarray):
    n = values.shape[0]
    mean = values.mean(axis=0)
    if n < 2:
        stderr = np.full_like(np.atleast_1d(mean), np.nan, dtype=float)
        if np.ndim(mean) == 0:
            return float(mean), float("nan")
        return mean, stderr
    stderr = values.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, stderr


def run_ensemble(
    specs,
    sched: EvolutionSchedule,
    n_disorder: int,
    n_traj: int,
    master_seed: int,
    *,
    workers: int = 1,
    cuts: Optional[Sequence[int]] = None,
    record_corr: bool = False,
    record_autocorr: bool = False,
    record_profile: bool = False,
    abort_fraction: float = 0.01,
    unit_cache_dir: Optional[str] = None,
    cache_tag: str = "",
) -> EnsembleResult:
    """Average trajectory observables over (disorder, noise) pairs per cell.

    specs is a sequence of ModelSpec grid cells; the cell index doubles as
    the seeding namespace, so results are a pure function of (master_seed,
    specs order, schedule) and independent of worker count or scheduling:
    units are reduced in fixed (cell, disorder, trajectory) order. Units that
    abort (rank loss) are excluded and counted; the run fails if more than
    abort_fraction of all units abort. With unit_cache_dir set, finished
    units are persisted and an interrupted run resumes where it stopped.
    """
    if isinstance(specs, ModelSpec):
        specs = [specs]
    specs = list(specs)
    if n_disorder < 1 or n_traj < 1:
        raise ParameterError("n_disorder and n_traj must be at least 1")
    if unit_cache_dir is not None:
        os.makedirs(unit_cache_dir, exist_ok=True)

    units = [
        (ci, d, t)
        for ci in range(len(specs))
        for d in range(n_disorder)
        for t in range(n_traj)
    ]
    results = Parallel(n_jobs=workers)(
        delayed(_run_unit)(
            specs[ci],
            sched,
            master_seed,
            ci,
            d,
            t,
            list(cuts) if cuts is not None else None,
            record_corr,
            record_autocorr,
            record_profile,
            unit_cache_dir,
            cache_tag,
        )
        for ci, d, t in units
    )

    aborted_units = [u for u, s in zip(units, results) if s is None]
    n_aborted = len(aborted_units)
    if n_aborted > abort_fraction * len(units):
        raise DegenerateStateError(
            f"{n_aborted} of {len(units)} trajectories aborted "
            f"(threshold {abort_fraction:.1%}); results discarded"
        )

    stats = []
    for ci, spec in enumerate(specs):
        ok = [
            s
            for (c, d, t), s in zip(units, results)
            if c == ci and s is not None
        ]
        if not ok:
            continue
        key = dict(gamma=spec.gamma, W=spec.W, L=spec.L)
        s_stack = np.stack([s.s_inf for s in ok])
        mean, err = _mean_stderr(s_stack)
        for j, l in enumerate(ok[0].cuts):
            stats.append(
                EnsembleStats(
                    **key,
                    observable="entropy",
                    index=float(l),
                    mean=float(np.atleast_1d(mean)[j]),
                    stderr=float(np.atleast_1d(err)[j]),
                    n_samples=len(ok),
                )
            )
        if ok[0].corr_r.size:
            c_stack = np.stack([s.corr_inf for s in ok])
            mean, err = _mean_stderr(c_stack)
            for j, r in enumerate(ok[0].corr_r):
                stats.append(
                    EnsembleStats(
                        **key,
                        observable="correlation",
                        index=float(r),
                        mean=float(mean[j]),
                        stderr=float(np.atleast_1d(err)[j]),
                        n_samples=len(ok),
                    )
                )
        if ok[0].autocorr_tau.size:
            # units share the sampling grid, so lags line up across the stack
            a_stack = np.stack([s.autocorr for s in ok])
            mean, err = _mean_stderr(a_stack)
            for j, tau in enumerate(ok[0].autocorr_tau):
                stats.append(
                    EnsembleStats(
                        **key,
                        observable="autocorr",
                        index=float(tau),
                        mean=float(np.atleast_1d(mean)[j]),
                        stderr=float(np.atleast_1d(err)[j]),
                        n_samples=len(ok),
                    )
                )
        o_stack = np.stack([s.orbital for s in ok])
        mean, err = _mean_stderr(o_stack)
        for j in range(spec.L):
            stats.append(
                EnsembleStats(
                    **key,
                    observable="orbital",
                    index=float(j - spec.L // 2),
                    mean=float(mean[j]),
                    stderr=float(np.atleast_1d(err)[j]),
                    n_samples=len(ok),
                )
            )
        if ok[0].profile.size:
            p_stack = np.stack([s.profile for s in ok])
            mean, err = _mean_stderr(p_stack)
            for j in range(spec.L - 1):
                stats.append(
                    EnsembleStats(
                        **key,
                        observable="profile",
                        index=float(j + 1),
                        mean=float(mean[j]),
                        stderr=float(np.atleast_1d(err)[j]),
                        n_samples=len(ok),
                    )
                )
    return EnsembleResult(
        stats=stats,
        n_units=len(units),
        n_aborted=n_aborted,
        aborted_units=aborted_units,
    )


@dataclass
class DtCheckReport:
    """Comparison of ensemble-averaged S(L/2, t) curves across step sizes."""

    dts: list
    times: np.ndarray  # (n_rec,)
    means: np.ndarray  # (n_dt, n_rec)
    stderrs: np.ndarray  # (n_dt, n_rec)
    pairs: list  # (i, j, max deviation in combined-stderr units)
    max_dev_sigma: float


def dt_convergence_check(
    spec: ModelSpec,
    dts: Sequence[float],
    t_total: float,
    t_sat: float,
    record_interval: float,
    n_disorder: int,
    n_traj: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> DtCheckReport:
    """Run identical physics at several step sizes and compare S(L/2, t).

    Noise streams are keyed by the position of each distinct dt value, so
    repeated dts share streams (zero deviation by construction) while
    distinct dts get independent noise. Deviations are reported in units of
    the combined standard error; exact agreement with undefined stderr
    counts as zero deviation.
    """
    dts = [float(d) for d in dts]
    if len(dts) < 1:
        raise ParameterError("need at least one dt")
    distinct = []
    cell_of = []
    for d in dts:
        if d not in distinct:
            distinct.append(d)
        cell_of.append(distinct.index(d))

    all_means, all_errs, all_times = [], [], []
    for dt, cell in zip(dts, cell_of):
        run_spec = replace(spec, dt=dt)
        sched = EvolutionSchedule(
            t_total=t_total, t_sat=t_sat, record_interval=record_interval, dt=dt
        )
        series = Parallel(n_jobs=workers)(
            delayed(_dt_check_unit)(run_spec, sched, master_seed, cell, d, t)
            for d in range(n_disorder)
            for t in range(n_traj)
        )
        times = series[0][0]
        stack = np.stack([s for _, s in series])
        mean, err = _mean_stderr(stack)
        all_times.append(times)
        all_means.append(np.atleast_1d(mean))
        all_errs.append(np.atleast_1d(err))

    n_rec = min(len(t) for t in all_times)
    times0 = all_times[0][:n_rec]
    for t_axis in all_times[1:]:
        if np.max(np.abs(t_axis[:n_rec] - times0)) > 1e-6:
            raise ParameterError(
                "record_interval does not align sampling instants across dts"
            )
    means = np.stack([m[:n_rec] for m in all_means])
    errs = np.stack([e[:n_rec] for e in all_errs])

    pairs = []
    max_dev = 0.0
    for i in range(len(dts)):
        for j in range(i + 1, len(dts)):
            diff = np.abs(means[i] - means[j])
            sigma = np.sqrt(errs[i] ** 2 + errs[j] ** 2)
            with np.errstate(invalid="ignore", divide="ignore"):
                dev = np.where(diff == 0.0, 0.0, diff / sigma)
            worst = float(np.nanmax(dev)) if dev.size else 0.0
            pairs.append((i, j, worst))
            max_dev = max(max_dev, worst)
    return DtCheckReport(
        dts=dts,
        times=times0,
        means=means,
        stderrs=errs,
        pairs=pairs,
        max_dev_sigma=max_dev,
    )


def _dt_check_unit(spec, sched, master_seed, cell, d_idx, t_idx):
    dis = sample_disorder(spec.W, spec.L, disorder_seed(master_seed, cell, d_idx))
    src = NoiseSource(master_seed=master_seed, stream=(d_idx, t_idx), L=spec.L, cell=cell)
    rec = run_trajectory(spec, dis, sched, src)
    return rec.times, rec.entropy_profiles[:, 0]
