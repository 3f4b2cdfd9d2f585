"""Command line entry point: exit codes, outputs, and file side effects."""

import json

import pytest

from sigma_eikonal.cli import main
from sigma_eikonal.distance import read_field
from sigma_eikonal.singular import SingularMask

DISK = json.dumps({"kind": "ball", "center": [0.0, 0.0], "radius": 1.0})


def test_version_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_no_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_shape_summary(capsys):
    rc = main(["shape", "--shape", DISK])
    assert rc == 0
    out = capsys.readouterr().out
    assert "ball" in out
    assert "inradius=1" in out


def test_missing_shape_is_config_error(capsys):
    rc = main(["shape"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_shape_json_is_config_error(capsys):
    rc = main(["shape", "--shape", "{not json"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_bad_grid_is_config_error(capsys):
    rc = main(["distance", "--shape", DISK, "--grid", "0"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_distance_writes_field(tmp_path, capsys):
    rc = main(["distance", "--shape", DISK, "--grid", "1/16",
               "--out", str(tmp_path)])
    assert rc == 0
    fld = read_field(tmp_path / "distance.field")
    assert fld.kind == "distance"
    assert "min=" in capsys.readouterr().out


def test_signed_distance_flag(tmp_path):
    rc = main(["distance", "--shape", DISK, "--grid", "1/16", "--signed",
               "--out", str(tmp_path)])
    assert rc == 0
    fld = read_field(tmp_path / "signed_distance.field")
    assert fld.kind == "signed_distance"
    assert fld.values.min() < 0.0


def test_shape_file_round_trip(tmp_path):
    spec_path = tmp_path / "disk.json"
    spec_path.write_text(DISK)
    rc = main(["shape", "--shape-file", str(spec_path),
               "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "shape.json").exists()


def test_singular_writes_mask(tmp_path, capsys):
    square = json.dumps({"kind": "box", "extents": [1.0, 1.0]})
    rc = main(["singular", "--shape", square, "--grid", "1/32",
               "--out", str(tmp_path)])
    assert rc == 0
    mask = SingularMask.load(tmp_path / "mask_multiproj.bin")
    assert mask.n_flags > 0
    assert "flags" in capsys.readouterr().out


def test_singular_gradjump_detector(tmp_path):
    square = json.dumps({"kind": "box", "extents": [1.0, 1.0]})
    rc = main(["singular", "--shape", square, "--grid", "1/32",
               "--detector", "gradjump", "--out", str(tmp_path)])
    assert rc == 0
    mask = SingularMask.load(tmp_path / "mask_gradjump.bin")
    assert mask.detector == "gradjump"


def test_eikonal_writes_solution_and_residuals(tmp_path, capsys):
    rc = main(["eikonal", "--shape", DISK, "--grid", "1/32",
               "--out", str(tmp_path)])
    assert rc == 0
    fld = read_field(tmp_path / "eikonal.field")
    assert fld.kind == "eikonal_solution"
    assert (tmp_path / "residuals.txt").exists()


def test_innerball_profile_csv(tmp_path, capsys):
    rc = main(["innerball", "--shape", DISK, "--spacing", "0.2",
               "--out", str(tmp_path)])
    assert rc == 0
    text = (tmp_path / "innerball_profile.csv").read_text()
    assert len(text.strip().splitlines()) > 10
    out = capsys.readouterr().out
    assert "overall=pass" in out


def test_verify_offset_identity(tmp_path, capsys):
    rc = main(["verify", "offset_identity", "--grid", "1/32",
               "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    verdict = (tmp_path / "verdict_offset_identity.txt").read_text()
    assert "passed=true" in verdict


def test_verify_unknown_name_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "made_up_study"])
    assert exc.value.code == 2


def test_config_file_feeds_defaults(tmp_path):
    cfg = {"grid": "1/16", "shape": json.loads(DISK),
           "out_dir": str(tmp_path), "quiet": True}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    rc = main(["distance", "--config", str(cfg_path)])
    assert rc == 0
    assert (tmp_path / "distance.field").exists()
