"""Run configuration: a flat key = value text format and its manifest hash.

The format is one assignment per line, '#' starts a comment, values are
scalars or comma-separated lists. Parse failures carry the line number and
text so a typo in a 40-line sweep file is findable. The physics-relevant
fields hash into a manifest fingerprint that also tags cached work units,
so a resumed run refuses to mix results from a different configuration.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, fields
from typing import Optional

from .errors import ParameterError

# fields that change the numbers a run produces; execution details
# (output path, worker count) deliberately stay out of the hash
PHYSICS_FIELDS = (
    "gamma",
    "W",
    "L",
    "dt",
    "boundary",
    "nnn",
    "n_disorder",
    "n_traj",
    "master_seed",
    "t_total",
    "t_sat",
    "record_interval",
    "record_corr",
    "record_autocorr",
    "record_profile",
)


@dataclass
class RunConfig:
    """Validated sweep definition: parameter grids, ensemble, schedule."""

    gamma: tuple
    W: tuple
    L: tuple
    master_seed: int
    t_total: float
    t_sat: float
    record_interval: float
    dt: float = 0.05
    boundary: str = "periodic"
    nnn: bool = False
    n_disorder: int = 1
    n_traj: int = 1
    record_corr: bool = True
    record_autocorr: bool = True
    record_profile: bool = True
    out: Optional[str] = None
    workers: Optional[int] = None

    def cells(self):
        """Grid cells in deterministic order: gamma outer, then W, then L.

        The position in this sequence is the cell index used for seeding.
        """
        return list(itertools.product(self.gamma, self.W, self.L))


def _parse_bool(raw: str, line_no: int, line: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ParameterError(f"line {line_no}: expected a boolean, got {line!r}")


def _parse_list(raw: str, cast, line_no: int, line: str):
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ParameterError(f"line {line_no}: empty list in {line!r}")
    try:
        return tuple(cast(s) for s in items)
    except ValueError as exc:
        raise ParameterError(f"line {line_no}: {exc} in {line!r}") from None


_SCHEMA = {
    # key: (kind, cast) where kind in {"list", "scalar", "bool", "str"}
    "gamma": ("list", float),
    "W": ("list", float),
    "L": ("list", int),
    "dt": ("scalar", float),
    "boundary": ("str", None),
    "nnn": ("bool", None),
    "n_disorder": ("scalar", int),
    "n_traj": ("scalar", int),
    "master_seed": ("scalar", int),
    "t_total": ("scalar", float),
    "t_sat": ("scalar", float),
    "record_interval": ("scalar", float),
    "record_corr": ("bool", None),
    "record_autocorr": ("bool", None),
    "record_profile": ("bool", None),
    "out": ("str", None),
    "workers": ("scalar", int),
    # used by the step-size comparison command only
    "dts": ("list", float),
}

_REQUIRED = ("gamma", "W", "L", "master_seed", "t_total", "t_sat", "record_interval")


def parse_config(path: str, *, require: tuple = _REQUIRED) -> dict:
    """Read a key = value file into a raw {key: parsed value} dict.

    Unknown keys, repeated keys, and malformed lines raise ParameterError
    with the offending line number and text.
    """
    values = {}
    with open(path) as fh:
        for line_no, raw_line in enumerate(fh, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(
                    f"line {line_no}: expected 'key = value', got {raw_line.rstrip()!r}"
                )
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _SCHEMA:
                raise ParameterError(
                    f"line {line_no}: unknown key {key!r} in {raw_line.rstrip()!r}"
                )
            if key in values:
                raise ParameterError(f"line {line_no}: duplicate key {key!r}")
            kind, cast = _SCHEMA[key]
            if kind == "list":
                values[key] = _parse_list(raw, cast, line_no, raw_line.rstrip())
            elif kind == "bool":
                values[key] = _parse_bool(raw, line_no, raw_line.rstrip())
            elif kind == "str":
                if not raw:
                    raise ParameterError(f"line {line_no}: empty value for {key!r}")
                values[key] = raw
            else:
                try:
                    values[key] = cast(raw)
                except ValueError:
                    raise ParameterError(
                        f"line {line_no}: cannot parse {raw!r} as {cast.__name__} "
                        f"for key {key!r}"
                    ) from None
    missing = [k for k in require if k not in values]
    if missing:
        raise ParameterError(
            f"config {path}: missing required keys: {', '.join(missing)}"
        )
    return values


def load_run_config(path: str) -> RunConfig:
    """Parse and validate a sweep configuration file."""
    values = parse_config(path)
    values.pop("dts", None)
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig(**{k: v for k, v in values.items() if k in known})
    if cfg.n_disorder < 1 or cfg.n_traj < 1:
        raise ParameterError("n_disorder and n_traj must be at least 1")
    if cfg.master_seed < 0:
        raise ParameterError("master_seed must be non-negative")
    if not all(g >= 0 for g in cfg.gamma):
        raise ParameterError("gamma values must be non-negative")
    if not all(w >= 0 for w in cfg.W):
        raise ParameterError("W values must be non-negative")
    return cfg


def config_hash(cfg: RunConfig) -> str:
    """Fingerprint of every field that affects produced numbers.

    Canonical form: sorted 'key=repr' lines over PHYSICS_FIELDS with
    defaults materialized, so two configs hash equal iff they would produce
    identical results (output path and worker count are excluded on
    purpose: they must not invalidate cached work units).
    """
    parts = []
    for name in sorted(PHYSICS_FIELDS):
        parts.append(f"{name}={getattr(cfg, name)!r}")
    text = "\n".join(parts)
    return hashlib.sha256(text.encode()).hexdigest()
