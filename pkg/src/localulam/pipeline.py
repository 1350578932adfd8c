"""Configuration-driven analysis runs.

A run builds windows at every start time, tracks the leading modes,
detects and characterises lifespans, applies the isoperimetric filter and
writes the artifacts into one output directory.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, NumericalError
from .fields import AnalyticDoubleWell, dwp_gridded, load_gridded_field, save_gridded_field
from .flow import FlowSpec
from .geometry import Domain, Patch, bins_in_patch, build_grid
from .lifespans import (Thresholds, characteristic_lifespans, detect_lifespans, lifespan_report,
                        mismatch_paths, write_json, write_mismatch_csv)
from .regularity import DEFAULT_ISO_THRESH, regularize_lifespans
from .render import render_vector
from .tracking import DEFAULT_P_CANDIDATES, select_p, track_modes, write_paths_csv
from .ulam import TransitionCache, build_windows

__all__ = [
    "AnalysisConfig",
    "NoValidPError",
    "RunResult",
    "load_config",
    "config_from_dict",
    "make_field",
    "window_times",
    "dry_run",
    "compute_windows",
    "run_analysis",
    "run_select_p",
    "generate_dwp_dataset",
    "load_modes",
    "save_modes",
    "analyse_windows",
    "with_overrides",
]

log = logging.getLogger("localulam")

DWP_DOMAIN = Domain(-4.0, 4.0, -4.0, 4.0)


class NoValidPError(NumericalError):
    """No candidate quasi-norm exponent produced a lifespan."""


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything one run needs; built from a JSON document by :func:`config_from_dict`.

    ``p`` is either a float or a tuple of candidates to select from.
    ``patch`` is None for a whole-domain run.
    """

    source: str
    domain: Domain
    depth: int
    n: int
    Q: int
    N_modes: int
    flow: FlowSpec
    t_i: float
    t_F: float
    patch: Patch | None
    p: float | tuple
    thresholds: Thresholds
    iso_thresh: float = DEFAULT_ISO_THRESH
    output_dir: str = "run"
    dataset: str | None = None
    workers: int = 1
    backend: str | None = None

    @property
    def selects_p(self) -> bool:
        return isinstance(self.p, tuple)

    def as_dict(self) -> dict:
        """JSON form that :func:`config_from_dict` reads back unchanged."""
        d = self.domain
        if self.patch is None:
            patch = {"whole_domain": True}
        else:
            patch = {"centre": list(self.patch.centre), "semi_axes": list(self.patch.semi_axes)}
        out = {
            "field": {"source": self.source} if self.dataset is None
            else {"source": self.source, "path": self.dataset},
            "domain": {"x_min": d.x_min, "x_max": d.x_max, "y_min": d.y_min, "y_max": d.y_max,
                       "periodic_x": d.periodic_x, "periodic_y": d.periodic_y},
            "depth": self.depth, "n": self.n, "Q": self.Q, "N_modes": self.N_modes,
            "flow": {"tau": self.flow.tau, "substeps": self.flow.substeps},
            "t_i": _num(self.t_i), "t_F": _num(self.t_F),
            "patch": patch,
            "p": {"candidates": list(self.p)} if self.selects_p else self.p,
            "thresholds": asdict(self.thresholds),
            "iso_thresh": self.iso_thresh,
            "output_dir": self.output_dir,
            "workers": self.workers,
        }
        if self.backend is not None:
            out["backend"] = self.backend
        return out


# --------------------------------------------------------------------------
# parsing

_TOP_KEYS = {"field", "domain", "depth", "n", "Q", "N_modes", "flow", "t_i", "t_F", "patch", "p",
             "thresholds", "iso_thresh", "output_dir", "workers", "backend", "description"}


def _need(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}: missing key {key!r}")
    return d[key]


def _obj(v, where):
    if not isinstance(v, dict):
        raise ConfigError(f"{where}: expected an object")
    return v


def _int(v, where, lo=1):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if v < lo:
        raise ConfigError(f"{where}: must be >= {lo}, got {v}")
    return v


def _real(v, where, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}: must be positive, got {v}")
    return float(v)


def _bool(v, where):
    if not isinstance(v, bool):
        raise ConfigError(f"{where}: expected true or false, got {v!r}")
    return v


def _pair(v, where, positive=False):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{where}: expected a pair of numbers")
    return tuple(_real(x, where, positive) for x in v)


def _unknown(d, allowed, where):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


def _parse_field(d):
    f = _obj(_need(d, "field", "config"), "field")
    _unknown(f, {"source", "path"}, "field")
    source = _need(f, "source", "field")
    if source == "dwp":
        if "path" in f:
            raise ConfigError("field: the analytic double well takes no path")
        return source, None
    if source == "dataset":
        path = _need(f, "path", "field")
        if not isinstance(path, str) or not path:
            raise ConfigError("field.path: expected a non-empty string")
        return source, path
    raise ConfigError(f"field.source: expected 'dwp' or 'dataset', got {source!r}")


def _parse_domain(d, source):
    if "domain" not in d:
        if source == "dwp":
            return DWP_DOMAIN
        raise ConfigError("config: missing key 'domain'")
    g = _obj(d["domain"], "domain")
    _unknown(g, {"x_min", "x_max", "y_min", "y_max", "periodic_x", "periodic_y"}, "domain")
    try:
        return Domain(*(_real(_need(g, k, "domain"), f"domain.{k}")
                        for k in ("x_min", "x_max", "y_min", "y_max")),
                      _bool(g.get("periodic_x", False), "domain.periodic_x"),
                      _bool(g.get("periodic_y", False), "domain.periodic_y"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"domain: {exc}") from exc


def _parse_patch(d):
    g = _obj(_need(d, "patch", "config"), "patch")
    _unknown(g, {"centre", "radius", "semi_axes", "whole_domain"}, "patch")
    if g.get("whole_domain", False) is True:
        if len(g) != 1:
            raise ConfigError("patch: whole_domain excludes other keys")
        return None
    centre = _pair(_need(g, "centre", "patch"), "patch.centre")
    if ("radius" in g) == ("semi_axes" in g):
        raise ConfigError("patch: give exactly one of radius or semi_axes")
    if "radius" in g:
        return Patch.circle(centre, _real(g["radius"], "patch.radius", positive=True))
    return Patch(centre, _pair(g["semi_axes"], "patch.semi_axes", positive=True))


def _parse_p(d):
    p = _need(d, "p", "config")
    if isinstance(p, dict):
        _unknown(p, {"candidates"}, "p")
        cands = p.get("candidates", list(DEFAULT_P_CANDIDATES))
        if not isinstance(cands, list) or not cands:
            raise ConfigError("p.candidates: expected a non-empty list")
        return tuple(_real(c, "p.candidates", positive=True) for c in cands)
    if p == "select":
        return tuple(DEFAULT_P_CANDIDATES)
    return _real(p, "p", positive=True)


def _parse_thresholds(d):
    g = _obj(d.get("thresholds", {}), "thresholds")
    _unknown(g, {"mode", "conservative", "up", "down", "percent"}, "thresholds")
    kw = {k: _real(g[k], f"thresholds.{k}") for k in ("conservative", "up", "down", "percent") if k in g}
    mode = g.get("mode", "conservative")
    try:
        return Thresholds(mode=mode, **kw)
    except ValueError as exc:
        raise ConfigError(f"thresholds: {exc}") from exc


def config_from_dict(d: dict) -> AnalysisConfig:
    """Validate a parsed JSON document; every problem raises :class:`ConfigError`."""
    _obj(d, "config")
    _unknown(d, _TOP_KEYS, "config")
    source, dataset = _parse_field(d)
    domain = _parse_domain(d, source)
    fl = _obj(d.get("flow", {}), "flow")
    _unknown(fl, {"tau", "substeps"}, "flow")
    flow = FlowSpec(_real(fl.get("tau", 1.0), "flow.tau", positive=True),
                    _int(fl.get("substeps", 20 if source == "dwp" else 10), "flow.substeps"))
    n = _int(_need(d, "n", "config"), "n")
    t_i = _real(_need(d, "t_i", "config"), "t_i")
    t_F = _real(_need(d, "t_F", "config"), "t_F")
    if t_i > t_F - n * flow.tau:
        raise ConfigError(f"need t_i <= t_F - n*tau, got t_i={t_i}, t_F={t_F}, n={n}, tau={flow.tau}")
    iso = _real(d.get("iso_thresh", DEFAULT_ISO_THRESH), "iso_thresh")
    if not 0 <= iso <= 1:
        raise ConfigError(f"iso_thresh must lie in [0, 1], got {iso}")
    out = d.get("output_dir", "run")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: expected a non-empty string")
    backend = d.get("backend")
    if backend not in (None, "python", "cython"):
        raise ConfigError(f"backend: expected 'python' or 'cython', got {backend!r}")
    return AnalysisConfig(
        source=source, domain=domain,
        depth=_int(_need(d, "depth", "config"), "depth"),
        n=n, Q=_square(_int(d.get("Q", 100), "Q")),
        N_modes=_int(d.get("N_modes", 4), "N_modes"),
        flow=flow, t_i=t_i, t_F=t_F, patch=_parse_patch(d), p=_parse_p(d),
        thresholds=_parse_thresholds(d), iso_thresh=iso, output_dir=out, dataset=dataset,
        workers=_int(d.get("workers", 1), "workers"), backend=backend)


def _square(Q):
    if math.isqrt(Q) ** 2 != Q:
        raise ConfigError(f"Q must be a perfect square, got {Q}")
    return Q


def load_config(path) -> AnalysisConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


# --------------------------------------------------------------------------
# running


def make_field(cfg: AnalysisConfig):
    if cfg.source == "dwp":
        return AnalyticDoubleWell()
    fld = load_gridded_field(cfg.dataset)
    d, g = fld.domain, cfg.domain
    if (d.x_min, d.x_max, d.y_min, d.y_max, d.periodic_x, d.periodic_y) != \
            (g.x_min, g.x_max, g.y_min, g.y_max, g.periodic_x, g.periodic_y):
        raise DataError(f"dataset domain {d} differs from the configured domain {g}")
    return fld


def window_times(cfg: AnalysisConfig) -> np.ndarray:
    """Start times ``t_i, t_i + tau, ...`` up to ``t_F - n*tau``."""
    tau = cfg.flow.tau
    count = int(math.floor((cfg.t_F - cfg.t_i) / tau + 1e-9)) - cfg.n + 1
    return cfg.t_i + tau * np.arange(count)


def _seed(cfg, grid):
    if cfg.patch is None:
        return np.arange(grid.n_bins, dtype=np.int64)
    return bins_in_patch(grid, cfg.patch)


def dry_run(cfg: AnalysisConfig) -> dict:
    """Check everything short of integrating: field source, grid, patch and time range."""
    from .errors import EmptyPatchError

    fld = make_field(cfg)
    grid = build_grid(cfg.domain, cfg.depth)
    seeds = _seed(cfg, grid)
    if seeds.size == 0:
        raise EmptyPatchError(f"no bin centre lies inside {cfg.patch}")
    times = window_times(cfg)
    if getattr(fld, "kind", None) == "gridded":
        fld.check_time([times[0], times[-1] + cfg.n * cfg.flow.tau])
    return {"bins": int(grid.n_bins), "seed_bins": int(seeds.size), "windows": int(times.size),
            "field": repr(fld)}


def compute_windows(cfg: AnalysisConfig, field=None):
    """Field, grid and windows (with SVDs) for every start time."""
    fld = make_field(cfg) if field is None else field
    grid = build_grid(cfg.domain, cfg.depth)
    times = window_times(cfg)
    cache = TransitionCache(fld, grid, cfg.Q, cfg.flow, backend=cfg.backend, workers=cfg.workers)
    seeds = _seed(cfg, grid)
    total = times.size

    def progress(w):
        k = int(round((w.t - cfg.t_i) / cfg.flow.tau)) + 1
        if k == total or k % 10 == 0:
            log.info("window %d/%d (t=%s, %d x %d)", k, total, _num(w.t), *w.composed.shape)

    windows = build_windows(fld, grid, cfg.patch, times, cfg.n, cfg.Q, cfg.flow, cfg.N_modes,
                            cache=cache, seed_bins=seeds, progress=progress)
    return fld, grid, windows


@dataclass(eq=False)
class RunResult:
    config: AnalysisConfig
    grid: object
    windows: list
    tracked: object
    mismatch: np.ndarray
    lifespans: list
    characteristic: object
    regularity: object
    p: float
    scores: dict | None = None
    files: list = field(default_factory=list)


def _choose_p(cfg, windows):
    if not cfg.selects_p:
        return cfg.p, None
    p, scores = select_p(windows, cfg.p, cfg.thresholds)
    if p is None:
        raise NoValidPError("no candidate p produced a lifespan")
    log.info("selected p=%s", p)
    return p, scores


def analyse_windows(cfg: AnalysisConfig, grid, windows, p: float):
    """Tracking, mismatch, lifespans, characteristic picks and regularity."""
    tracked = track_modes(windows, p)
    sig = mismatch_paths(tracked)
    spans = detect_lifespans(sig, tracked.times[:-1], cfg.thresholds, tracked.values[:-1],
                             exclude_final=True)
    char = characteristic_lifespans(spans)
    reg = regularize_lifespans(spans, tracked, grid, cfg.iso_thresh)
    return tracked, sig, spans, char, reg


def run_analysis(cfg: AnalysisConfig, *, field=None, out_dir=None, render: bool = True,
                 windows=None, grid=None) -> RunResult:
    """Full run; writes the artifacts into ``out_dir`` (default ``cfg.output_dir``).

    ``windows`` and ``grid`` may be passed in to reuse an earlier build.
    """
    if windows is None:
        _, grid, windows = compute_windows(cfg, field)
    elif grid is None:
        grid = build_grid(cfg.domain, cfg.depth)
    p, scores = _choose_p(cfg, windows)
    tracked, sig, spans, char, reg = analyse_windows(cfg, grid, windows, p)
    res = RunResult(cfg, grid, windows, tracked, sig, spans, char, reg, p, scores)
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    try:
        _write_outputs(res, out, render)
    except OSError as exc:
        raise DataError(f"cannot write results to {out}: {exc}") from exc
    return res


def _write_outputs(res: RunResult, out: Path, render: bool):
    cfg, tracked = res.config, res.tracked
    out.mkdir(parents=True, exist_ok=True)
    files = []

    def put(name):
        files.append(out / name)
        return out / name

    write_json(cfg.as_dict(), put("config.json"))
    write_paths_csv(tracked, put("singular_paths.csv"))
    write_mismatch_csv(res.mismatch, tracked.times[:-1], put("mismatch.csv"))
    evaluated = tracked.times[:-2]
    meta = {
        "p": res.p,
        "threshold_mode": cfg.thresholds.mode,
        "windows": int(tracked.times.size),
        "t_range": [_num(evaluated[0]), _num(evaluated[-1])] if evaluated.size else None,
    }
    if res.scores is not None:
        meta["p_scores"] = {repr(k): v for k, v in res.scores.items()}
    write_json(lifespan_report(res.lifespans, res.characteristic, tracked.n_modes, **meta),
               put("lifespans.json"))
    write_json(res.regularity.as_dict(), put("regularity.json"))
    save_modes(tracked, res.grid, put("modes.npz"))
    if render:
        img = out / "images"
        img.mkdir(exist_ok=True)
        index = {float(t): k for k, t in enumerate(tracked.times)}
        for kind in ("eldest", "min_eq", "max_var_sv"):
            span = getattr(res.characteristic, kind)
            if span is None:
                continue
            ka, ko = index[span.birth], index[span.death]
            name = f"{kind}_mode{span.mode + 1}"
            files.append(render_vector(tracked.u(ka, span.mode), tracked.u_bins(ka), res.grid,
                                       img / f"{name}_u_t{_num(span.birth)}.pgm"))
            files.append(render_vector(tracked.v(ko, span.mode), tracked.v_bins(ko), res.grid,
                                       img / f"{name}_v_t{_num(span.death)}.pgm"))
    res.files = files


def run_select_p(cfg: AnalysisConfig, *, field=None, out_dir=None, windows=None) -> dict:
    """Score every candidate ``p`` and write ``p_selection.json``."""
    cands = cfg.p if cfg.selects_p else tuple(DEFAULT_P_CANDIDATES)
    if windows is None:
        _, _, windows = compute_windows(cfg, field)
    p, scores = select_p(windows, cands, cfg.thresholds)
    doc = {"selected": p, "scores": {repr(k): v for k, v in scores.items()}}
    out = Path(cfg.output_dir if out_dir is None else out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_json(doc, out / "p_selection.json")
    except OSError as exc:
        raise DataError(f"cannot write results to {out}: {exc}") from exc
    return doc


# --------------------------------------------------------------------------
# mode storage for later rendering


def save_modes(tracked, grid, path) -> None:
    """Tracked singular vectors of every window, in slot order."""
    W = tracked.windows
    u_ptr = np.cumsum([0] + [w.row_bins.size for w in W])
    v_ptr = np.cumsum([0] + [w.col_bins.size for w in W])
    d = grid.domain
    np.savez(
        path,
        times=tracked.times, values=tracked.values, order=tracked.order,
        u_ptr=u_ptr, v_ptr=v_ptr,
        u_bins=np.concatenate([w.row_bins for w in W]),
        v_bins=np.concatenate([w.col_bins for w in W]),
        U=np.concatenate([w.U[:, tracked.order[k]] for k, w in enumerate(W)]),
        V=np.concatenate([w.V[:, tracked.order[k]] for k, w in enumerate(W)]),
        domain=np.array([d.x_min, d.x_max, d.y_min, d.y_max, d.periodic_x, d.periodic_y], dtype=float),
        depth=np.array(grid.depth),
    )


def load_modes(run_dir):
    """``(grid, lookup)`` where ``lookup(kind, t, mode)`` returns ``(vec, bins)``.

    ``mode`` is one-based and ``kind`` is ``"u"`` or ``"v"``.
    """
    path = Path(run_dir) / "modes.npz"
    try:
        z = dict(np.load(path))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    x0, x1, y0, y1, px, py = z["domain"]
    grid = build_grid(Domain(x0, x1, y0, y1, bool(px), bool(py)), int(z["depth"]))
    times = z["times"]

    def lookup(kind, t, mode):
        hit = np.flatnonzero(np.isclose(times, float(t), rtol=0, atol=1e-9))
        if hit.size == 0:
            raise ConfigError(f"no window starts at t={t}")
        k = int(hit[0])
        if not 1 <= mode <= z["values"].shape[1]:
            raise ConfigError(f"mode must lie in 1..{z['values'].shape[1]}, got {mode}")
        if kind not in ("u", "v"):
            raise ConfigError(f"vector kind must be 'u' or 'v', got {kind!r}")
        ptr, bins, M = z[f"{kind}_ptr"], z[f"{kind}_bins"], z[kind.upper()]
        sl = slice(int(ptr[k]), int(ptr[k + 1]))
        return M[sl, mode - 1], bins[sl]

    return grid, lookup


# --------------------------------------------------------------------------
# synthetic data


def generate_dwp_dataset(nx: int, ny: int, times, path, domain: Domain = DWP_DOMAIN):
    """Sample the double well on an ``nx`` by ``ny`` node lattice and write it to ``path``."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ConfigError("times must be a non-empty sequence")
    if times.size > 1 and not np.all(np.diff(times) > 0):
        raise ConfigError("times must be strictly increasing")
    if isinstance(nx, bool) or isinstance(ny, bool) or nx < 2 or ny < 2:
        raise ConfigError("nx and ny must be >= 2")
    fld = dwp_gridded(domain, int(nx), int(ny), times)
    try:
        save_gridded_field(fld, path)
    except OSError as exc:
        raise DataError(f"cannot write dataset to {path}: {exc}") from exc
    return Path(path)


def with_overrides(cfg: AnalysisConfig, **kw) -> AnalysisConfig:
    """Copy of ``cfg`` with fields replaced; the time-range invariant is re-checked."""
    new = replace(cfg, **{k: v for k, v in kw.items() if v is not None})
    if new.t_i > new.t_F - new.n * new.flow.tau:
        raise ConfigError(f"need t_i <= t_F - n*tau, got t_i={new.t_i}, t_F={new.t_F}")
    return new


def _num(t):
    t = float(t)
    return int(t) if t.is_integer() else t
