"""End-to-end acceptance checks.

Each test prints one ``[PASS]`` or ``[FAIL]`` line with the measured
quantities, then asserts.  The double-well runs take a few minutes in
total; windows are built once per case and shared.

Run directly with ``python tests/test_acceptance.py``.
"""
import json
import math
import sys
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from localulam.fields import GriddedField, save_gridded_field
from localulam.flow import FlowSpec
from localulam.geometry import Domain, Patch, build_grid
from localulam.lifespans import characteristic_lifespans, equivariance_mismatch
from localulam.pipeline import (analyse_windows, compute_windows, config_from_dict, dry_run,
                                generate_dwp_dataset, load_config, run_analysis, with_overrides)
from localulam.regularity import isoperimetric_best, regularize_lifespans
from localulam.tracking import DEFAULT_P_CANDIDATES, score_p, select_p
from localulam.ulam import TransitionMatrix, build_windows, truncated_svd

pytestmark = pytest.mark.slow

PRESETS = resources.files("localulam") / "presets"
DWP_CASES = {"a": "dwp_case_a", "b": "dwp_case_b", "c": "dwp_case_c"}
DATASET_PRESETS = ("dancing_dipoles", "merging_monopoles", "random_ics")


def report(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {label}: {detail}"
    capman = _capture[0]
    if capman is not None:
        with capman.global_and_fixture_disabled():
            print(line)
    else:
        print(line)
    return ok


_capture = [None]


@pytest.fixture(autouse=True)
def _uncaptured(request):
    _capture[0] = request.config.pluginmanager.getplugin("capturemanager")
    yield
    _capture[0] = None


def preset(name):
    return load_config(PRESETS / f"{name}.json")


@lru_cache(maxsize=None)
def case(name):
    """``(cfg, grid, windows)`` for one double-well preset."""
    cfg = preset(DWP_CASES[name])
    _, grid, windows = compute_windows(cfg)
    return cfg, grid, windows


@lru_cache(maxsize=None)
def analysed(name):
    cfg, grid, windows = case(name)
    return analyse_windows(cfg, grid, windows, cfg.p)


def spans_text(spans):
    return ", ".join(f"m{s.mode + 1}[{s.birth:g},{s.death:g}]" for s in spans) or "none"


# ---------------------------------------------------------------------------
# 1


def test_criterion_1_leading_value_near_one():
    tracked = analysed("a")[0]
    early = tracked.values[tracked.times <= 10, 0]
    ok = bool(np.all((early >= 0.95) & (early <= 1.001)))
    report("1(i)", ok, f"leading tracked value on t in [0,10] spans [{early.min():.4f}, {early.max():.4f}]"
                       f" (target [0.95, 1.001])")
    assert ok


def test_criterion_1_eldest_band():
    spans = analysed("a")[2]
    hit = [s for s in spans if 71 <= s.birth <= 77 and 117 <= s.death <= 123]
    report("1(ii)", bool(hit), f"spans with birth in [71,77] and death in [117,123]: {spans_text(hit)}")
    assert hit


def test_criterion_1_early_band():
    spans = analysed("a")[2]
    hit = [s for s in spans if s.birth <= 2 and 17 <= s.death <= 23]
    report("1(iii)", bool(hit), f"spans with birth <= 2 and death in [17,23]: {spans_text(hit)}")
    assert hit


# ---------------------------------------------------------------------------
# 2


def test_criterion_2_characteristic_spans_agree():
    ch = analysed("b")[3]
    picks = {k: getattr(ch, k) for k in ("eldest", "min_eq", "max_var_sv")}
    same = all(v is not None for v in picks.values()) and \
        len({(v.mode, v.birth, v.death) for v in picks.values()}) == 1
    overlap = same and picks["eldest"].birth <= 75 and picks["eldest"].death >= 25
    detail = "; ".join(f"{k}={spans_text([v]) if v else 'none'}" for k, v in picks.items())
    report("2", same and overlap, f"{detail} (need one span overlapping [25,75])")
    assert same and overlap


# ---------------------------------------------------------------------------
# 3


def test_criterion_3_chaotic_seed_has_no_lifespans():
    cfg, _, windows = case("c")
    scores = score_p(windows, DEFAULT_P_CANDIDATES, cfg.thresholds)
    p, _ = select_p(windows, DEFAULT_P_CANDIDATES, cfg.thresholds)
    none_found = all(s is None for s in scores.values())
    ok = none_found and p is None
    report("3", ok, f"select_p -> {p}; candidates with lifespans: "
                    f"{[k for k, s in scores.items() if s is not None] or 'none'}")
    assert ok


# ---------------------------------------------------------------------------
# 4


@pytest.mark.parametrize("name, expected", [("a", 0.1), ("b", 0.3)])
def test_criterion_4_p_selection(name, expected):
    cfg, _, windows = case(name)
    p, scores = select_p(windows, DEFAULT_P_CANDIDATES, cfg.thresholds)
    valid = {k: v for k, v in scores.items() if v is not None}
    best = min(valid.values())
    exact = p == expected
    fallback = p is not None and scores[p] - best <= 0.02
    ok = exact or fallback
    how = "exact" if exact else "fallback: within 0.02 of the minimum"
    report(f"4({name})", ok, f"selected p={p} (paper {expected}; {how}); mean mismatch at selected "
                             f"{scores[p]:.5f}, at {expected} {scores[expected]}, minimum {best:.5f}")
    assert ok


# ---------------------------------------------------------------------------
# 5


def test_criterion_5_mismatch_calibration():
    eye = TransitionMatrix(np.arange(2), np.arange(2), sp.identity(2, format="csr"))
    a = np.array([1.0, 0.0])
    vals = [equivariance_mismatch(a, [0, 1], eye, b)
            for b in (a, np.array([math.cos(math.pi / 4), math.sin(math.pi / 4)]), np.array([0.0, 1.0]))]
    target = (0.0, math.sqrt(2) * math.sin(math.pi / 8), 1.0)
    ok = all(abs(v - t) <= 1e-9 for v, t in zip(vals, target))
    report("5", ok, "identical/45deg/orthogonal -> " + ", ".join(f"{v:.10f}" for v in vals))
    assert ok


# ---------------------------------------------------------------------------
# 6


def test_criterion_6_svd_oracle():
    worst_rel, worst_res = 0.0, 0.0
    for seed in range(25):
        rng = np.random.default_rng(1000 + seed)
        m, n = int(rng.integers(20, 81)), int(rng.integers(20, 61))
        A = sp.random(m, n, density=float(rng.uniform(0.05, 0.1)), format="csr", random_state=seed)
        oracle = np.linalg.svd(A.toarray(), compute_uv=False)[:4]
        for method in ("lanczos", "auto"):
            U, S, V = truncated_svd(A, 4, method=method)
            k = int(np.sum(oracle > 0))
            rel = np.abs(S[:k] - oracle[:k]) / oracle[:k]
            worst_rel = max(worst_rel, float(rel.max()))
            res = np.linalg.norm(A @ V - U * S, axis=0)
            worst_res = max(worst_res, float(res.max()))
    ok = worst_rel <= 1e-9 and worst_res <= 1e-8
    report("6", ok, f"25 matrices, worst relative sigma error {worst_rel:.2e}, worst residual {worst_res:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 7


def test_criterion_7_ulam_properties():
    still = _Still()
    grid = build_grid(Domain(-4, 4, -4, 4), 12)
    ws = build_windows(still, grid, Patch.circle((-2.0, 0.0), 1.0), np.arange(0.0, 5.0), 10, 100,
                       FlowSpec(), 4)
    ident = all(np.array_equal(w.row_bins, w.col_bins)
                and abs(w.composed.matrix - sp.identity(w.composed.shape[0])).max() == 0 for w in ws)
    sv_err = max(float(np.abs(w.S - 1).max()) for w in ws)
    _, _, windows = case("a")
    rs = np.concatenate([m.row_sums() for w in windows for m in w.step_matrices + [w.composed]])
    ok = ident and sv_err <= 1e-12 and rs.min() >= 0 and rs.max() <= 1 + 1e-12
    report("7", ok, f"identity windows exact: {ident}, max |sigma-1| {sv_err:.1e}; "
                    f"double-well row sums in [{rs.min():.4f}, {rs.max():.15f}]")
    assert ok


class _Still:
    def velocity(self, x, y, t):
        return np.zeros_like(x), np.zeros_like(y)


# ---------------------------------------------------------------------------
# 8


def _block(h, w):
    m = np.zeros((h + 4, w + 4), dtype=bool)
    m[2:2 + h, 2:2 + w] = True
    return m


def test_criterion_8_isoperimetric_oracles():
    r = 10
    yy, xx = np.mgrid[-r - 2:r + 2, -r - 2:r + 2] + 0.5
    single = isoperimetric_best(_block(1, 1))[0]
    square = isoperimetric_best(_block(5, 5))[0]
    disk = isoperimetric_best(xx ** 2 + yy ** 2 <= r * r)[0]
    strip = isoperimetric_best(_block(1, 6))[0]
    ok = single == 1.0 and abs(square - math.pi / 4) <= 1e-9 and disk > 0.85 and strip == 0.0
    report("8(oracles)", ok, f"single {single}, 5x5 block {square:.12f}, disk r=10 {disk:.4f}, "
                             f"1x6 strip {strip}")
    assert ok


def test_criterion_8_zero_threshold_keeps_spans():
    cfg, grid, _ = case("a")
    tracked, _, spans, _, _ = analysed("a")
    rep = regularize_lifespans(spans, tracked, grid, iso_thresh=0.0)
    nonempty = {(s.mode, s.t) for s in rep.steps if s.n_components > 0}
    kept = [s for s in spans if all((s.mode, t) in nonempty for t in s.times)]
    got = {(z.mode, z.birth, z.death) for z in rep.lifespans}
    ok = all((s.mode, s.birth, s.death) in got for s in kept) and len(kept) > 0
    report("8(iso_thresh=0)", ok, f"{len(kept)} of {len(spans)} spans have nonempty masks at every step; "
                                  f"all reproduced: {ok}")
    assert ok


# ---------------------------------------------------------------------------
# 9


@pytest.fixture(scope="module")
def dwp192(tmp_path_factory):
    path = tmp_path_factory.mktemp("dwp192") / "data"
    generate_dwp_dataset(192, 192, np.arange(0.0, 141.0), path)
    return path


def _match(a, b, tol=2):
    """Spans of ``a`` without a counterpart in ``b`` (any mode) within ``tol`` steps at both ends."""
    return [s for s in a if not any(abs(s.birth - z.birth) <= tol and abs(s.death - z.death) <= tol for z in b)]


def test_criterion_9_gridded_matches_analytic(dwp192, tmp_path):
    cfg, grid, windows = case("a")
    _, spans, char = analysed("a")[0], analysed("a")[2], analysed("a")[3]
    gcfg = config_from_dict({**cfg.as_dict(), "field": {"source": "dataset", "path": str(dwp192)},
                             "flow": {"tau": 1.0, "substeps": 20}})
    res = run_analysis(gcfg, out_dir=tmp_path / "gridded", render=False)
    lead = float(np.abs(res.tracked.values[:, 0] - analysed("a")[0].values[:, 0]).max())
    miss_a, miss_g = _match(spans, res.lifespans), _match(res.lifespans, spans)
    same_char = all(
        (x is None) == (y is None) and (x is None or (x.mode == y.mode and abs(x.birth - y.birth) <= 2
                                                      and abs(x.death - y.death) <= 2))
        for x, y in ((char.eldest, res.characteristic.eldest), (char.min_eq, res.characteristic.min_eq),
                     (char.max_var_sv, res.characteristic.max_var_sv)))
    ok = lead <= 0.02 and not miss_a and not miss_g and same_char
    report("9", ok, f"leading path sup diff {lead:.4f}; {len(spans)} analytic / {len(res.lifespans)} "
                    f"gridded spans; unmatched analytic {spans_text(miss_a)}, unmatched gridded "
                    f"{spans_text(miss_g)}; characteristic picks agree: {same_char}")
    assert ok


# ---------------------------------------------------------------------------
# 10


@pytest.fixture(scope="module")
def periodic_data(tmp_path_factory):
    """Steady-shape cellular flow on the periodic square, sampled at t = 0..150."""
    path = tmp_path_factory.mktemp("cells") / "data"
    dom = Domain(0.0, 2 * math.pi, 0.0, 2 * math.pi, True, True)
    nx = ny = 32
    x = np.arange(nx) * dom.width / nx
    X, Y = np.meshgrid(x, x)
    times = np.arange(0.0, 151.0)
    amp = 1.0 + 0.1 * np.sin(times / 10.0)
    u = amp[:, None, None] * (np.sin(X) * np.cos(Y))[None]
    v = amp[:, None, None] * (-np.cos(X) * np.sin(Y))[None]
    save_gridded_field(GriddedField(dom, nx, ny, times, u, v), path)
    return path


@pytest.mark.parametrize("name", DATASET_PRESETS)
def test_criterion_10_presets_run_on_synthetic_data(name, periodic_data, tmp_path):
    cfg = preset(name)
    schema = cfg.depth == 14 and cfg.n == 10 and cfg.iso_thresh == 0.85 and cfg.domain.periodic_x
    cfg = with_overrides(cfg, dataset=str(periodic_data))
    info = dry_run(cfg)
    short = with_overrides(cfg, t_F=cfg.t_i + cfg.n + 4)
    res = run_analysis(short, out_dir=tmp_path / name)
    files = sorted(p.name for p in (tmp_path / name).iterdir())
    ok = schema and info["windows"] > 0 and "lifespans.json" in files and "regularity.json" in files
    doc = json.loads((tmp_path / name / "lifespans.json").read_text())
    report(f"10({name})", ok, f"schema ok {schema}; dry run {info['windows']} windows, {info['seed_bins']} "
                              f"seed bins; short run wrote {len(files)} entries, "
                              f"{doc['n_lifespans']} lifespans at p={res.p}")
    assert ok


def test_criterion_10_double_well_presets_dry_run():
    infos = {name: dry_run(preset(name)) for name in DWP_CASES.values()}
    ok = all(i["windows"] == 131 and i["seed_bins"] > 0 for i in infos.values())
    report("10(double well)", ok, ", ".join(f"{k}: {v['seed_bins']} seed bins" for k, v in infos.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([str(Path(__file__)), "-v", "-p", "no:cacheprovider"]))
