"""Experiment configuration parsing and the driver registry."""

import json

import pytest

from sigma_eikonal.experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentError,
    format_verdict,
    parse_fraction,
    parse_grid,
)


def test_parse_fraction_accepts_ratios_and_decimals():
    assert parse_fraction("1/128") == pytest.approx(1.0 / 128)
    assert parse_fraction("0.015625") == pytest.approx(1.0 / 64)
    assert parse_fraction(" 1/4 ") == 0.25


def test_parse_fraction_rejects_nonpositive_and_garbage():
    with pytest.raises(ExperimentError):
        parse_fraction("0")
    with pytest.raises(ExperimentError):
        parse_fraction("-1/2")
    with pytest.raises((ExperimentError, ValueError)):
        parse_fraction("h")


def test_parse_grid_forms():
    assert parse_grid("1/64") == (pytest.approx(1.0 / 64), None)
    h, dims = parse_grid("0.05,40,60")
    assert h == pytest.approx(0.05)
    assert dims == (40, 60)
    with pytest.raises(ExperimentError):
        parse_grid("0.05,40")          # single dim is not a grid
    with pytest.raises(ExperimentError):
        parse_grid("")


def test_config_round_trips_through_json():
    cfg = ExperimentConfig(seed=3, grid="1/32", rho_min=0.07,
                           shape={"kind": "ball", "center": [0.0, 0.0],
                                  "radius": 1.0},
                           t_values=[0.1, 0.2], quiet=True)
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ExperimentError):
        ExperimentConfig.from_json(json.dumps({"sneed": 1}))


def test_config_validates_grid_early():
    with pytest.raises(ExperimentError):
        ExperimentConfig(grid="zero")
    assert ExperimentConfig(grid="1/64").grid_h == pytest.approx(1.0 / 64)
    assert ExperimentConfig().grid_h is None


def test_config_save_and_load(tmp_path):
    cfg = ExperimentConfig(seed=9, out_dir=str(tmp_path))
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert ExperimentConfig.from_json(path.read_text()) == cfg


def test_experiment_registry_names():
    assert set(EXPERIMENTS) == {
        "offset_identity",
        "lemma_gradient",
        "typical_density",
        "counterexample",
        "equivalence",
    }
    for fn in EXPERIMENTS.values():
        assert callable(fn)


def test_format_verdict_renders_types():
    text = format_verdict({"passed": True, "max_dev": 1.25e-13, "n": 4})
    assert "passed" in text
    assert "true" in text.lower()
    assert "4" in text
