import json
from importlib import resources

import numpy as np
import pytest

from localulam.errors import ConfigError, DataError, EmptyPatchError
from localulam.pipeline import (AnalysisConfig, NoValidPError, config_from_dict, dry_run, generate_dwp_dataset,
                                load_config, load_modes, run_analysis, run_select_p, window_times,
                                with_overrides)
from localulam.render import read_pgm

SMALL = {
    "field": {"source": "dwp"},
    "depth": 8, "n": 3, "Q": 16, "N_modes": 2,
    "flow": {"tau": 1.0, "substeps": 10},
    "t_i": 0, "t_F": 9,
    "patch": {"centre": [-2.0, 0.0], "radius": 1.5},
    "p": 0.5,
}


def small(**kw):
    d = json.loads(json.dumps(SMALL))
    d.update(kw)
    return d


def test_defaults():
    cfg = config_from_dict(small())
    assert isinstance(cfg, AnalysisConfig)
    assert (cfg.domain.x_min, cfg.domain.x_max) == (-4.0, 4.0)
    assert cfg.thresholds.mode == "conservative" and cfg.iso_thresh == 0.85
    assert window_times(cfg).tolist() == [0, 1, 2, 3, 4, 5, 6]


def test_round_trip_through_as_dict():
    cfg = config_from_dict(small(p={"candidates": [0.1, 2]}, thresholds={"mode": "percentage"}))
    again = config_from_dict(cfg.as_dict())
    assert again == cfg
    assert again.selects_p and again.p == (0.1, 2.0)


@pytest.mark.parametrize("change", [
    {"depth": 0}, {"depth": 2.5}, {"n": 0}, {"Q": 50}, {"N_modes": True},
    {"t_F": 2}, {"p": -1}, {"p": {"candidates": []}}, {"iso_thresh": 1.5},
    {"thresholds": {"mode": "median"}}, {"thresholds": {"down": 0.9}},
    {"patch": {"centre": [0, 0]}}, {"patch": {"centre": [0, 0], "radius": 1, "semi_axes": [1, 1]}},
    {"patch": {"centre": [0], "radius": 1}}, {"flow": {"tau": 0}}, {"flow": {"steps": 3}},
    {"field": {"source": "netcdf"}}, {"field": {"source": "dataset"}}, {"colour": "red"},
    {"domain": {"x_min": 1, "x_max": 0, "y_min": 0, "y_max": 1}}, {"backend": "fortran"},
])
def test_invalid_configs(change):
    with pytest.raises(ConfigError):
        config_from_dict(small(**change))


def test_t_final_must_cover_one_window():
    with pytest.raises(ConfigError, match="t_i <= t_F - n"):
        config_from_dict(small(t_i=5, t_F=7))
    assert window_times(config_from_dict(small(t_i=5, t_F=8))).tolist() == [5]


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(tmp_path / "bad.json")


@pytest.mark.parametrize("name", ["dwp_case_a", "dwp_case_b", "dwp_case_c", "dancing_dipoles",
                                  "merging_monopoles", "random_ics"])
def test_presets_validate(name):
    path = resources.files("localulam") / "presets" / f"{name}.json"
    cfg = load_config(path)
    assert cfg.n == 10 and cfg.iso_thresh == 0.85
    assert cfg.depth == (12 if name.startswith("dwp") else 14)


def test_dry_run():
    info = dry_run(config_from_dict(small()))
    assert info["bins"] == 256 and info["windows"] == 7 and info["seed_bins"] > 0


def test_dry_run_empty_patch():
    with pytest.raises(EmptyPatchError):
        dry_run(config_from_dict(small(patch={"centre": [-2.1, 0.1], "radius": 0.01})))


def test_missing_dataset(tmp_path):
    cfg = config_from_dict(small(field={"source": "dataset", "path": str(tmp_path / "nope")},
                                 domain={"x_min": -4, "x_max": 4, "y_min": -4, "y_max": 4}))
    with pytest.raises(DataError):
        dry_run(cfg)


def test_dataset_domain_must_match(tmp_path):
    generate_dwp_dataset(8, 8, np.arange(0.0, 10.0), tmp_path / "d")
    cfg = config_from_dict(small(field={"source": "dataset", "path": str(tmp_path / "d")},
                                 domain={"x_min": -4, "x_max": 4, "y_min": -4, "y_max": 5}))
    with pytest.raises(DataError, match="domain"):
        dry_run(cfg)


def test_dataset_time_range_checked(tmp_path):
    generate_dwp_dataset(8, 8, np.arange(0.0, 5.0), tmp_path / "d")
    cfg = config_from_dict(small(field={"source": "dataset", "path": str(tmp_path / "d")},
                                 domain={"x_min": -4, "x_max": 4, "y_min": -4, "y_max": 4}))
    with pytest.raises(DataError):
        dry_run(cfg)


def test_generate_validation(tmp_path):
    for args in [(1, 4, [0.0]), (4, 4, []), (4, 4, [1.0, 0.0])]:
        with pytest.raises(ConfigError):
            generate_dwp_dataset(*args, tmp_path / "x")


def test_overrides_recheck_time_range():
    cfg = config_from_dict(small())
    assert with_overrides(cfg, t_F=12.0, workers=None).t_F == 12.0
    with pytest.raises(ConfigError):
        with_overrides(cfg, t_F=2.0)


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()
            and p.suffix in (".csv", ".json")}


def test_run_outputs_and_determinism(tmp_path):
    cfg = config_from_dict(small())
    res = run_analysis(cfg, out_dir=tmp_path / "a")
    run_analysis(with_overrides(cfg, workers=4), out_dir=tmp_path / "b")
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert set(a) == {"config.json", "singular_paths.csv", "mismatch.csv", "lifespans.json",
                      "regularity.json"}
    a.pop("config.json"), b.pop("config.json")
    assert a == b
    head = (tmp_path / "a" / "singular_paths.csv").read_text().splitlines()
    assert head[0] == "t,mode,singular_value" and len(head) == 1 + 7 * 2
    rep = json.loads((tmp_path / "a" / "lifespans.json").read_text())
    assert rep["t_range"] == [0, 4] and rep["p"] == 0.5
    assert rep["n_lifespans"] == len(res.lifespans)
    for span in res.lifespans:
        assert span.death <= 4


def test_images_for_characteristic_spans(tmp_path):
    res = run_analysis(config_from_dict(small()), out_dir=tmp_path)
    imgs = sorted(p.name for p in (tmp_path / "images").iterdir())
    ch = res.characteristic
    assert ch.eldest is not None
    assert f"eldest_mode{ch.eldest.mode + 1}_u_t{int(ch.eldest.birth)}.pgm" in imgs
    assert read_pgm(tmp_path / "images" / imgs[0]).shape == (16, 16)


def test_stored_modes(tmp_path):
    res = run_analysis(config_from_dict(small()), out_dir=tmp_path, render=False)
    grid, lookup = load_modes(tmp_path)
    vec, bins = lookup("v", 2.0, 1)
    np.testing.assert_array_equal(vec, res.tracked.v(2, 0))
    np.testing.assert_array_equal(bins, res.tracked.v_bins(2))
    with pytest.raises(ConfigError):
        lookup("v", 2.5, 1)
    with pytest.raises(ConfigError):
        lookup("v", 2.0, 3)
    with pytest.raises(DataError):
        load_modes(tmp_path / "nowhere")


def test_select_p_document(tmp_path):
    doc = run_select_p(config_from_dict(small(p={"candidates": [0.5, 1.0, 2.0]})), out_dir=tmp_path)
    assert set(doc["scores"]) == {"0.5", "1.0", "2.0"}
    assert json.loads((tmp_path / "p_selection.json").read_text()) == doc


def test_no_valid_p(tmp_path):
    strict = {"mode": "conservative", "conservative": 1e-9}
    cfg = config_from_dict(small(p={"candidates": [0.5]}, thresholds=strict))
    with pytest.raises(NoValidPError):
        run_analysis(cfg, out_dir=tmp_path)


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(DataError):
        run_analysis(config_from_dict(small()), out_dir=blocker / "sub", render=False)
