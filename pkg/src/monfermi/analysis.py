"""Central-charge fits and finite-size-scaling data collapses.

Two fit families operate on ensemble-averaged entropy data:

* conformal fits of S(l, L) = (c/3) ln((L/pi) sin(pi l/L)) + s0, either
  across sizes at the half-chain cut or across cuts at one size;
* scaling collapses that slide curves from different L onto a master curve,
  scored by the neighbor-interpolation cost function and minimized over the
  critical coupling (entropy collapse) or (critical coupling, alpha, beta)
  (central-charge collapse).

Everything here is a pure function of plain arrays plus small dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize

from .errors import ParameterError

# grid nodes per axis in the coarse scans that precede simplex refinement
GRID_POINTS_1D = 161
GRID_POINTS_3D = (33, 17, 17)

# relative spacing used to split exactly tied abscissas before the
# neighbor-interpolation cost is evaluated
TIE_BREAK_REL = 1e-12

_PENALTY = 1e12


@dataclass(frozen=True)
class CftFit:
    """Result of a weighted least-squares conformal entropy fit."""

    c: float
    s0: float
    stderr_c: float
    stderr_s0: float
    window: tuple  # abscissa labels (L values or cut lengths) used


def _weighted_line_fit(x, y, d):
    """Weighted LS for y = a*x + b -> (a, b, var_a, var_b)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ParameterError("errors must be positive for a weighted fit")
    w = 1.0 / d**2
    sw = w.sum()
    sx = (w * x).sum()
    sxx = (w * x * x).sum()
    sy = (w * y).sum()
    sxy = (w * x * y).sum()
    det = sw * sxx - sx * sx
    if det <= 0 or not np.isfinite(det):
        raise ParameterError("degenerate abscissas: fit is singular")
    a = (sw * sxy - sx * sy) / det
    b = (sxx * sy - sx * sxy) / det
    var_a = sw / det
    var_b = sxx / det
    return float(a), float(b), float(var_a), float(var_b)


def conformal_abscissa(l, L) -> np.ndarray:
    """ln((L/pi) sin(pi l / L)), the conformal coordinate of a cut."""
    l = np.asarray(l, dtype=float)
    return np.log((L / math.pi) * np.sin(math.pi * l / L))


def fit_half_chain_charge(points: Sequence) -> CftFit:
    """Effective central charge from half-chain entropies across sizes.

    points: iterable of (L, S, stderr). At l = L/2 the conformal abscissa
    reduces to ln(L/pi), so the charge is 3x the slope of S against ln(L/pi).
    """
    pts = [(int(L), float(s), float(e)) for L, s, e in points]
    sizes = sorted({p[0] for p in pts})
    if len(sizes) < 3:
        raise ParameterError(
            f"need at least 3 distinct sizes, got {len(sizes)}"
        )
    x = np.array([math.log(L / math.pi) for L, _, _ in pts])
    y = np.array([s for _, s, _ in pts])
    d = np.array([e for _, _, e in pts])
    a, b, va, vb = _weighted_line_fit(x, y, d)
    return CftFit(
        c=3.0 * a,
        s0=b,
        stderr_c=3.0 * math.sqrt(va),
        stderr_s0=math.sqrt(vb),
        window=tuple(sizes),
    )


def fit_profile_charge(
    profile: Sequence,
    L: int,
    window: Optional[tuple] = None,
) -> CftFit:
    """Effective charge c(L) from the entropy profile of a single size.

    profile: iterable of (l, S, stderr) over bipartition lengths. The default
    fit window keeps l in [L/4, 3L/4], away from lattice-scale corrections
    near the chain ends. Points at l and L - l share an abscissa by the sin
    symmetry; duplicates are fine, only a fully degenerate abscissa set is
    rejected.
    """
    if window is None:
        window = (L / 4, 3 * L / 4)
    lo, hi = window
    pts = [
        (float(l), float(s), float(e))
        for l, s, e in profile
        if lo - 1e-9 <= float(l) <= hi + 1e-9
    ]
    if len(pts) < 3:
        raise ParameterError(
            f"need at least 3 cuts inside the window, got {len(pts)}"
        )
    x = conformal_abscissa([p[0] for p in pts], L)
    y = np.array([p[1] for p in pts])
    d = np.array([p[2] for p in pts])
    if np.ptp(x) < 1e-12:
        raise ParameterError("degenerate abscissas: all cuts equivalent")
    a, b, va, vb = _weighted_line_fit(x, y, d)
    cuts = tuple(sorted({p[0] for p in pts}))
    return CftFit(
        c=3.0 * a,
        s0=b,
        stderr_c=3.0 * math.sqrt(va),
        stderr_s0=math.sqrt(vb),
        window=cuts,
    )


def collapse_cost(x, y, d) -> float:
    """Collapse quality: mean squared deviation of each interior point from
    the straight line through its two x-neighbors, in propagated-error units.

    With points sorted by x, for each interior i

        ybar_i  = [(x_{i+1} - x_i) y_{i-1} - (x_{i-1} - x_i) y_{i+1}]
                  / (x_{i+1} - x_{i-1})
        Delta_i^2 = d_i^2 + [(x_{i+1} - x_i)^2 d_{i-1}^2
                             + (x_{i-1} - x_i)^2 d_{i+1}^2]
                    / (x_{i+1} - x_{i-1})^2

    and the cost is the average of (y_i - ybar_i)^2 / Delta_i^2 over the
    n - 2 interior points. Input order is irrelevant (points are sorted
    internally, ties ordered by y then d); exactly tied abscissas are split
    by a relative 1e-12 perturbation so the interpolant stays defined.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    n = x.size
    if n < 3:
        raise ParameterError(f"collapse cost needs at least 3 points, got {n}")
    if np.any(d <= 0):
        raise ParameterError("every point needs a positive error bar")
    order = np.lexsort((d, y, x))
    x = x[order].copy()
    y = y[order]
    d = d[order]
    span = x[-1] - x[0]
    if span <= 0:
        raise ParameterError("all abscissas coincide; no collapse axis")
    tie = np.flatnonzero(np.diff(x) == 0)
    if tie.size:
        eps = span * TIE_BREAK_REL
        for i in range(1, n):
            if x[i] <= x[i - 1]:
                x[i] = x[i - 1] + eps
    dx_next = x[2:] - x[1:-1]
    dx_prev = x[:-2] - x[1:-1]
    width = x[2:] - x[:-2]
    ybar = (dx_next * y[:-2] - dx_prev * y[2:]) / width
    delta2 = d[1:-1] ** 2 + (dx_next**2 * d[:-2] ** 2 + dx_prev**2 * d[2:] ** 2) / width**2
    w = (y[1:-1] - ybar) ** 2 / delta2
    return float(w.sum() / (n - 2))


@dataclass(frozen=True)
class ParamSeries:
    """One system size's observable vs the driving parameter (gamma or W)."""

    L: int
    p: np.ndarray
    y: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        y = np.asarray(self.y, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if not (p.ndim == 1 and p.shape == y.shape == d.shape):
            raise ParameterError("series arrays must be 1d and equal length")
        if p.size < 2:
            raise ParameterError("series needs at least 2 parameter points")
        if np.any(np.diff(p) <= 0):
            raise ParameterError("parameter values must be strictly increasing")
        if np.any(d <= 0):
            raise ParameterError("series errors must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class CollapseResult:
    """Optimized collapse: critical coupling, optional shape parameters,
    minimal cost, and the parameter region with cost <= 2 * eps_min."""

    critical: float
    eps_min: float
    interval: tuple  # (lo, hi) with cost <= 2 eps_min along the critical axis
    alpha: Optional[float] = None
    beta: Optional[float] = None
    alpha_interval: Optional[tuple] = None
    beta_interval: Optional[tuple] = None
    status: str = "converged"  # "converged" | "boundary"
    grid: Optional[np.ndarray] = None  # critical-axis scan nodes
    grid_eps: Optional[np.ndarray] = None


def _common_range(series):
    lo = max(s.p[0] for s in series)
    hi = min(s.p[-1] for s in series)
    return lo, hi


def entropy_rescale(series, p_c, interpolators):
    """Triples (x, y, d) of the entropy collapse at candidate p_c.

    x = (p - p_c) (ln L)^2 and y = S(p) - S(p_c), the offset per size coming
    from monotone cubic interpolation; measured error bars carry over
    unchanged (the interpolated offset is treated as exact).
    """
    xs, ys, ds = [], [], []
    for s in series:
        offset = float(interpolators[s.L](p_c))
        lnL2 = math.log(s.L) ** 2
        xs.append((s.p - p_c) * lnL2)
        ys.append(s.y - offset)
        ds.append(s.d)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ds)


def _sublevel_interval(grid, eps_grid, threshold, center):
    hit = grid[eps_grid <= threshold]
    if hit.size == 0:
        step = grid[1] - grid[0] if grid.size > 1 else 0.0
        return (center - step / 2, center + step / 2)
    return (min(float(hit.min()), center), max(float(hit.max()), center))


def collapse_entropy(
    series: Sequence[ParamSeries],
    search_range: tuple,
    *,
    grid_points: int = GRID_POINTS_1D,
) -> CollapseResult:
    """Find the critical coupling that collapses half-chain entropy curves.

    For each candidate p_c the curves are shifted by their interpolated value
    at p_c and stretched horizontally by (ln L)^2; the candidate minimizing
    the neighbor-interpolation cost wins. A coarse grid scan locates the
    basin and a simplex refinement polishes it; the quoted interval is the
    bounding box of grid nodes with cost <= 2 eps_min. A minimum within half
    a grid cell of the search boundary is flagged status="boundary".
    """
    series = list(series)
    if len({s.L for s in series}) < 3:
        raise ParameterError("entropy collapse needs at least 3 system sizes")
    lo, hi = float(search_range[0]), float(search_range[1])
    if not lo < hi:
        raise ParameterError("empty search range")
    rlo, rhi = _common_range(series)
    if lo < rlo - 1e-12 or hi > rhi + 1e-12:
        raise ParameterError(
            f"search range [{lo}, {hi}] not bracketed by data [{rlo:.6g}, {rhi:.6g}]"
        )
    interp = {s.L: PchipInterpolator(s.p, s.y) for s in series}

    def cost(p_c: float) -> float:
        if not lo <= p_c <= hi:
            return _PENALTY * (1.0 + abs(p_c))
        return collapse_cost(*entropy_rescale(series, p_c, interp))

    grid = np.linspace(lo, hi, grid_points)
    eps_grid = np.array([cost(p) for p in grid])
    best = int(np.argmin(eps_grid))
    res = minimize(
        lambda v: cost(float(v[0])),
        x0=[grid[best]],
        method="Nelder-Mead",
        bounds=[(lo, hi)],
        options={"xatol": 1e-6, "fatol": 1e-12},
    )
    critical = float(res.x[0])
    eps_min = float(res.fun)
    step = grid[1] - grid[0]
    status = "converged"
    if critical - lo < step / 2 or hi - critical < step / 2:
        status = "boundary"
    interval = _sublevel_interval(grid, eps_grid, 2 * eps_min, critical)
    return CollapseResult(
        critical=critical,
        eps_min=eps_min,
        interval=interval,
        status=status,
        grid=grid,
        grid_eps=eps_grid,
    )


def charge_scaling_factor(L, beta: float) -> float:
    """g(L) = [1 + 1/(2 ln L - beta)]^{-1}, the finite-size charge correction."""
    den = 2.0 * math.log(L) - beta
    if den == 0:
        raise ParameterError("beta hits 2 ln L; scaling factor undefined")
    return 1.0 / (1.0 + 1.0 / den)


def charge_rescale(series, p_c: float, alpha: float, beta: float):
    """Triples of the central-charge collapse at candidate (p_c, alpha, beta).

    Points at p <= p_c are excluded (the square root is undefined there);
    the rest map to x = ln L - alpha / sqrt(p - p_c), y = c(L, p) * p * g(L).
    Returns None when fewer than 3 points survive or g(L) is ill defined.
    """
    xs, ys, ds = [], [], []
    for s in series:
        den = 2.0 * math.log(s.L) - beta
        if den <= 1e-6:
            return None
        g = 1.0 / (1.0 + 1.0 / den)
        keep = s.p - p_c > 1e-12
        if not np.any(keep):
            continue
        p = s.p[keep]
        xs.append(math.log(s.L) - alpha / np.sqrt(p - p_c))
        ys.append(s.y[keep] * p * g)
        ds.append(s.d[keep] * p * g)
    if not xs:
        return None
    x = np.concatenate(xs)
    if x.size < 3:
        return None
    return x, np.concatenate(ys), np.concatenate(ds)


def collapse_charge(
    series: Sequence[ParamSeries],
    search_range: tuple,
    alpha_range: tuple = (0.5, 8.0),
    beta_range: tuple = (0.0, 6.0),
    *,
    grid_points: tuple = GRID_POINTS_3D,
) -> CollapseResult:
    """Collapse effective-charge curves onto the BKT scaling form.

    Minimizes the neighbor-interpolation cost over (p_c, alpha, beta) with
    x = ln L - alpha / sqrt(p - p_c) and y = c * p * g(L); candidates that
    leave fewer than 3 usable points (or make g ill defined) are penalized
    rather than raised, so the optimizer can slide past them. Coarse grid,
    then bounded simplex. Per-parameter intervals come from the axis-aligned
    bounding box of the grid sublevel set cost <= 2 eps_min.
    """
    series = list(series)
    if len({s.L for s in series}) < 3:
        raise ParameterError("charge collapse needs at least 3 system sizes")
    lo, hi = float(search_range[0]), float(search_range[1])
    alo, ahi = float(alpha_range[0]), float(alpha_range[1])
    blo, bhi = float(beta_range[0]), float(beta_range[1])
    if not (lo < hi and alo < ahi and blo < bhi):
        raise ParameterError("empty search range")
    bmax = min(2.0 * math.log(s.L) for s in series) - 0.1
    bhi_eff = min(bhi, bmax)
    if bhi_eff <= blo:
        raise ParameterError(
            "beta range incompatible with smallest system size (g undefined)"
        )

    def cost(v) -> float:
        p_c, alpha, beta = float(v[0]), float(v[1]), float(v[2])
        if not (lo <= p_c <= hi and alo <= alpha <= ahi and blo <= beta <= bhi_eff):
            return _PENALTY
        triples = charge_rescale(series, p_c, alpha, beta)
        if triples is None:
            return _PENALTY
        return collapse_cost(*triples)

    g0, g1, g2 = grid_points
    pcs = np.linspace(lo, hi, g0)
    als = np.linspace(alo, ahi, g1)
    bes = np.linspace(blo, bhi_eff, g2)
    eps_grid = np.full((g0, g1, g2), np.inf)
    for i, p_c in enumerate(pcs):
        for j, alpha in enumerate(als):
            for k, beta in enumerate(bes):
                eps_grid[i, j, k] = cost((p_c, alpha, beta))
    flat_best = int(np.argmin(eps_grid))
    bi, bj, bk = np.unravel_index(flat_best, eps_grid.shape)
    if not np.isfinite(eps_grid[bi, bj, bk]) or eps_grid[bi, bj, bk] >= _PENALTY:
        raise ParameterError(
            "no candidate in the search ranges leaves enough usable points"
        )
    res = minimize(
        cost,
        x0=[pcs[bi], als[bj], bes[bk]],
        method="Nelder-Mead",
        bounds=[(lo, hi), (alo, ahi), (blo, bhi_eff)],
        options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 4000},
    )
    critical, alpha, beta = (float(v) for v in res.x)
    eps_min = float(res.fun)
    thresh = 2 * eps_min
    ok = eps_grid <= thresh
    if ok.any():
        ii, jj, kk = np.nonzero(ok)
        pc_int = (min(pcs[ii].min(), critical), max(pcs[ii].max(), critical))
        al_int = (min(als[jj].min(), alpha), max(als[jj].max(), alpha))
        be_int = (min(bes[kk].min(), beta), max(bes[kk].max(), beta))
    else:
        pc_int = (critical - (pcs[1] - pcs[0]) / 2, critical + (pcs[1] - pcs[0]) / 2)
        al_int = (alpha - (als[1] - als[0]) / 2, alpha + (als[1] - als[0]) / 2)
        be_int = (beta - (bes[1] - bes[0]) / 2, beta + (bes[1] - bes[0]) / 2)
    status = "converged"
    for val, (vlo, vhi), nodes in (
        (critical, (lo, hi), pcs),
        (alpha, (alo, ahi), als),
        (beta, (blo, bhi_eff), bes),
    ):
        half = (nodes[1] - nodes[0]) / 2
        if val - vlo < half or vhi - val < half:
            status = "boundary"
    return CollapseResult(
        critical=critical,
        eps_min=eps_min,
        interval=pc_int,
        alpha=alpha,
        beta=beta,
        alpha_interval=al_int,
        beta_interval=be_int,
        status=status,
        grid=pcs,
        grid_eps=eps_grid.min(axis=(1, 2)),
    )


@dataclass(frozen=True)
class BoundaryPoint:
    """One estimated point of the phase boundary in the (W, gamma) plane."""

    W: float
    gamma: float
    W_err: Optional[tuple]  # (lo, hi) interval or None when not applicable
    gamma_err: Optional[tuple]
    source: str  # "gamma-scan" (fixed W) or "W-scan" (fixed gamma)


def phase_boundary(entries: Sequence) -> list:
    """Merge collapse results into an ordered boundary table.

    entries: iterables of (kind, fixed_value, CollapseResult) where kind is
    "gamma_c" for a gamma scan at fixed W (the result's critical value is a
    gamma) or "W_c" for a W scan at fixed gamma. Points are ordered by W,
    then gamma, so the table is parametrized monotonically along the W axis.
    Missing intervals propagate as None, never as zero-width bars.
    """
    points = []
    for kind, fixed, res in entries:
        interval = getattr(res, "interval", None)
        if kind == "gamma_c":
            points.append(
                BoundaryPoint(
                    W=float(fixed),
                    gamma=float(res.critical),
                    W_err=None,
                    gamma_err=tuple(interval) if interval is not None else None,
                    source="gamma-scan",
                )
            )
        elif kind == "W_c":
            points.append(
                BoundaryPoint(
                    W=float(res.critical),
                    gamma=float(fixed),
                    W_err=tuple(interval) if interval is not None else None,
                    gamma_err=None,
                    source="W-scan",
                )
            )
        else:
            raise ParameterError(f"unknown boundary entry kind: {kind!r}")
    points.sort(key=lambda b: (b.W, b.gamma))
    return points
