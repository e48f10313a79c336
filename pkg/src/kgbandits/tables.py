"""Precomputed index tables with a documented, checksummed file format.

Two table kinds:

* ``bernoulli_lattice`` -- Gittins/Whittle indices on the integer offset
  lattice from a base belief (base_total + j, base_n + m), 0 <= j <= m <=
  depth.  Values are stored row-major by layer m (triangular layout).
  Built by a charge-grid sweep: for each charge the stopping value of every
  lattice state is computed in one backward induction, and each state's
  index is the linearly interpolated zero crossing over the charge grid.

* ``gaussian_bonus`` -- the Gaussian learning bonus l(n) on a geometric
  n-grid (unit observation variance), interpolated linearly in 1/n.  The
  index of an arm with precision n and observation precision tau is
  mean + l(n/tau)/sqrt(tau).

File format (see docs/index_table_format.md):
  line 1: ``KGIDX1``
  line 2: canonical JSON header (sorted keys, compact separators)
  then  : count * 8 bytes of little-endian float64 values, row-major
  tail  : ``sha256:<hex>`` + newline, hash of everything before it.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError
from .families import ArmBelief, RewardFamily
from .indices import gaussian_gi_bonus, gittins_index

MAGIC = b"KGIDX1\n"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class IndexTable:
    """Immutable precomputed index values plus their provenance header."""

    header: dict
    values: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.values).all():
            raise NumericError("index table contains non-finite values")


def _canonical_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def save_index_table(table: IndexTable, path: str | Path, force: bool = False) -> Path:
    """Persist a table; refuses to overwrite a differing file unless forced."""
    path = Path(path)
    header = dict(table.header)
    header["count"] = int(table.values.size)
    header["version"] = FORMAT_VERSION
    body = MAGIC + _canonical_header(header) + table.values.astype("<f8").tobytes()
    digest = hashlib.sha256(body).hexdigest()
    payload = body + f"sha256:{digest}\n".encode()
    if path.exists():
        if path.read_bytes() == payload:
            return path
        if not force:
            raise ConfigError(
                f"{path} exists with different contents; pass force=True to overwrite"
            )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    return path


def load_index_table(path: str | Path) -> IndexTable:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ConfigError(f"{path} is not an index-table file")
    tail = raw.rfind(b"sha256:")
    if tail < 0:
        raise ConfigError(f"{path} is missing its checksum")
    body, check = raw[:tail], raw[tail:]
    digest = check.decode().strip().split(":", 1)[1]
    if hashlib.sha256(body).hexdigest() != digest:
        raise ConfigError(f"{path} failed its checksum")
    nl = body.index(b"\n", len(MAGIC))
    header = json.loads(body[len(MAGIC) : nl + 1])
    values = np.frombuffer(body[nl + 1 :], dtype="<f8").copy()
    if values.size != header["count"]:
        raise ConfigError(f"{path} value count mismatch")
    return IndexTable(header=header, values=values)


# ---------------------------------------------------------------------------
# Bernoulli lattice tables.
# ---------------------------------------------------------------------------


def _tri_offset(m):
    """Start of layer m in the row-major triangular layout."""
    m = np.asarray(m)
    return m * (m + 1) // 2


def tail_depth(gamma: float, tail_tol: float, scale: float = 1.0) -> int:
    """Depth beyond which the discounted tail is below ``tail_tol``."""
    if gamma >= 1.0:
        raise ConfigError("tail truncation requires gamma < 1")
    return max(1, math.ceil(math.log(tail_tol * (1.0 - gamma) / scale) / math.log(gamma)))


def build_bernoulli_gi_table(
    base_total: float,
    base_n: float,
    gamma: float,
    depth: int,
    *,
    horizon: float = math.inf,
    tail_tol: float = 1e-7,
    lam_points: int = 4097,
    chunk: int = 512,
    spot_checks: int = 4,
) -> IndexTable:
    """Gittins indices for every lattice state reachable within ``depth``
    observations of the base belief."""
    if not (0.0 < base_total < base_n):
        raise ConfigError(f"invalid Bernoulli base belief ({base_total}, {base_n})")
    if math.isinf(horizon):
        D = depth + tail_depth(gamma, tail_tol)
    else:
        D = int(horizon)
        if D <= depth:
            raise ConfigError("table depth must be smaller than the finite horizon")
    cells = (depth + 1) * (depth + 2) // 2
    lam_grid = np.linspace(0.0, 1.0, lam_points)
    lo_lam = np.zeros(cells)
    lo_val = np.full(cells, np.inf)
    hi_lam = np.ones(cells)
    hi_val = np.zeros(cells)
    hi_set = np.zeros(cells, dtype=bool)

    for start in range(0, lam_points, chunk):
        lam = lam_grid[start : start + chunk]
        L = lam.size
        v = np.zeros((L, D + 2))
        for d in range(D - 1, -1, -1):
            mu = (base_total + np.arange(d + 1)) / (base_n + d)
            cont = mu - lam[:, None] + gamma * (mu * v[:, 1 : d + 2] + (1.0 - mu) * v[:, : d + 1])
            v = np.maximum(cont, 0.0)
            if d <= depth:
                # bracket the root of the pre-clamp continuation value: it
                # crosses zero linearly, unlike the clamped stopping value
                pos = cont > 0.0
                cnt = pos.sum(axis=0)
                cell = _tri_offset(d) + np.arange(d + 1)
                full = cnt == L
                lo_lam[cell[full]] = lam[-1]
                lo_val[cell[full]] = cont[-1, full]
                inner = (cnt > 0) & (cnt < L)
                ci = cell[inner]
                ki = cnt[inner] - 1
                lo_lam[ci] = lam[ki]
                lo_val[ci] = cont[ki, inner]
                hi_lam[ci] = lam[ki + 1]
                hi_val[ci] = cont[ki + 1, inner]
                hi_set[ci] = True
                none = (cnt == 0) & ~hi_set[cell]
                cn = cell[none]
                hi_lam[cn] = lam[0]
                hi_val[cn] = cont[0, none]
                hi_set[cn] = True

    denom = lo_val - hi_val
    frac = np.where(denom > 0, lo_val / np.where(denom > 0, denom, 1.0), 0.5)
    values = lo_lam + frac * (hi_lam - lo_lam)

    # invariant: an index never falls below the predictive mean
    m_idx = np.concatenate([np.full(d + 1, d) for d in range(depth + 1)])
    j_idx = np.concatenate([np.arange(d + 1) for d in range(depth + 1)])
    means = (base_total + j_idx) / (base_n + m_idx)
    if (values < means - 1e-9).any():
        raise NumericError("table build produced an index below the mean")
    values = np.maximum(values, means)

    header = {
        "kind": "bernoulli_lattice",
        "family": "bernoulli",
        "gamma": gamma,
        "horizon": "inf" if math.isinf(horizon) else int(horizon),
        "base_total": base_total,
        "base_n": base_n,
        "depth": int(depth),
        "dp_depth": int(D),
        "tail_tol": tail_tol,
        "lam_points": int(lam_points),
    }
    table = IndexTable(header=header, values=values)
    if spot_checks:
        rng = np.random.default_rng(0)
        dev = 0.0
        for _ in range(spot_checks):
            m = int(rng.integers(0, min(depth, 40) + 1))
            j = int(rng.integers(0, m + 1))
            exact = gittins_index(
                ArmBelief(base_total + j, base_n + m),
                RewardFamily("bernoulli"),
                gamma,
                horizon if math.isinf(horizon) else horizon - m,
                tail_tol=tail_tol,
            )
            dev = max(dev, abs(exact - bernoulli_gi_lookup(table, base_total + j, base_n + m)))
        header["est_accuracy"] = float(dev)
        table = IndexTable(header=header, values=values)
    return table


def bernoulli_gi_lookup(table: IndexTable, S, N):
    """Exact lattice lookup; inputs must sit on the table's offset lattice."""
    h = table.header
    j = np.rint(np.asarray(S, dtype=float) - h["base_total"]).astype(int)
    m = np.rint(np.asarray(N, dtype=float) - h["base_n"]).astype(int)
    if np.any(np.abs(np.asarray(S) - h["base_total"] - j) > 1e-6) or np.any(
        np.abs(np.asarray(N) - h["base_n"] - m) > 1e-6
    ):
        raise ConfigError("query state is off the table's lattice")
    if np.any(j < 0) or np.any(j > m) or np.any(m > h["depth"]):
        raise ConfigError("query state outside the table depth")
    out = table.values[_tri_offset(m) + j]
    return out if np.asarray(out).shape else float(out)


def bernoulli_gi_depth(table: IndexTable) -> int:
    return int(table.header["depth"])


# ---------------------------------------------------------------------------
# Gaussian bonus tables.
# ---------------------------------------------------------------------------


def build_gaussian_bonus_table(
    gamma: float,
    n_min: float,
    n_max: float,
    *,
    horizon: float = math.inf,
    points_per_decade: int = 10,
    tail_tol: float = 1e-7,
) -> IndexTable:
    """Learning bonus l(n) on a geometric n-grid, unit observation variance."""
    if not (0 < n_min < n_max):
        raise ConfigError("need 0 < n_min < n_max")
    decades = math.log10(n_max / n_min)
    pts = max(4, math.ceil(decades * points_per_decade) + 1)
    n_grid = np.geomspace(n_min, n_max, pts)
    bonuses = np.array(
        [gaussian_gi_bonus(float(n), gamma, horizon, tail_tol=tail_tol) for n in n_grid]
    )
    if (np.diff(bonuses) > 1e-9).any():
        raise NumericError("gaussian bonus must decrease along the n-grid")
    header = {
        "kind": "gaussian_bonus",
        "family": "gaussian",
        "gamma": gamma,
        "horizon": "inf" if math.isinf(horizon) else int(horizon),
        "n_grid": [float(x) for x in n_grid],
        "tail_tol": tail_tol,
    }
    return IndexTable(header=header, values=bonuses)


def gaussian_bonus_lookup(table: IndexTable, n_std):
    """Interpolate the bonus linearly in 1/n; decays to 0 beyond the grid."""
    n_grid = np.asarray(table.header["n_grid"])
    x = np.concatenate([[0.0], 1.0 / n_grid[::-1]])
    y = np.concatenate([[0.0], table.values[::-1]])
    q = 1.0 / np.asarray(n_std, dtype=float)
    if np.any(q > x[-1] * (1.0 + 1e-9)):
        raise ConfigError("query precision below the table's n_min")
    out = np.interp(q, x, y)
    return out if np.asarray(out).shape else float(out)


# ---------------------------------------------------------------------------
# On-disk cache.
# ---------------------------------------------------------------------------


def cache_dir() -> Path:
    env = os.environ.get("KGBANDITS_TABLE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "kgbandits"


def _cache_path(tag: str, params: dict) -> Path:
    blob = json.dumps(params, sort_keys=True).encode()
    return cache_dir() / f"{tag}-{hashlib.sha256(blob).hexdigest()[:16]}.idx"


@functools.lru_cache(maxsize=64)
def _cached_load(path: str, mtime: float) -> IndexTable:
    return load_index_table(path)


def get_bernoulli_gi_table(
    base_total: float, base_n: float, gamma: float, depth: int, **kwargs
) -> IndexTable:
    """Load the requested table from the cache directory, building on miss."""
    params = {
        "base_total": base_total,
        "base_n": base_n,
        "gamma": gamma,
        "depth": depth,
        **{k: v for k, v in kwargs.items() if k != "spot_checks"},
    }
    path = _cache_path("bern-gi", params)
    if path.exists():
        return _cached_load(str(path), path.stat().st_mtime)
    table = build_bernoulli_gi_table(base_total, base_n, gamma, depth, **kwargs)
    save_index_table(table, path)
    return table


def get_gaussian_bonus_table(gamma: float, n_min: float, n_max: float, **kwargs) -> IndexTable:
    params = {"gamma": gamma, "n_min": n_min, "n_max": n_max, **kwargs}
    path = _cache_path("gauss-bonus", params)
    if path.exists():
        return _cached_load(str(path), path.stat().st_mtime)
    table = build_gaussian_bonus_table(gamma, n_min, n_max, **kwargs)
    save_index_table(table, path)
    return table
