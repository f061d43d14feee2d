import json
import logging
import os.path as osp
from dataclasses import replace

import pandas as pd
import pytest

from notchkin import cli
from notchkin.calibration import load_trials, segment_cycles
from notchkin.geometry import dump_tube, load_tube, preset_path, tube_to_dict


def run(capsys, *argv):
    status = cli.main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def test_parser():
    args = cli.make_parser().parse_args(["fit", "--trials", "a.csv", "--trials", "b.csv"])
    assert args.subcommand == "fit"
    assert args.trials == ["a.csv", "b.csv"]
    assert args.out == "."


def test_read_config(outdir):
    config = cli.read_config()
    assert config.getfloat("calibration", "hysteresis_band_mm") == 0.05
    assert config.get("toolpath", "drill_direction") == "inward"

    path = osp.join(outdir, "extra.ini")
    with open(path, "w") as f:
        f.write("[calibration]\nscan_points=50\n")
    assert cli.read_config(path).getint("calibration", "scan_points") == 50
    with pytest.raises(OSError):
        cli.read_config(osp.join(outdir, "missing.ini"))


def test_missing_subcommand(outdir):
    # stdin is not a terminal under pytest
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["--out", outdir])
    assert excinfo.value.code == 2


class TestValidate:
    def test_valid(self, capsys, outdir):
        status, out, _ = run(capsys, "validate", "--tube", preset_path("tube1"),
                             "--out", outdir)
        assert status == 0
        assert "Tube is valid" in out
        with open(osp.join(outdir, "notchkin.log")) as f:
            assert "cmd_validate successfully completed" in f.read()

    def test_preset_name(self, capsys, outdir):
        status, _, _ = run(capsys, "validate", "--tube", "tube3", "--out", outdir)
        assert status == 0

    def test_invalid(self, capsys, outdir, tube1):
        path = osp.join(outdir, "bad.json")
        dump_tube(replace(tube1, inner_radius=0.75), path)
        status, out, _ = run(capsys, "validate", "--tube", path, "--out", outdir)
        assert status == 1
        assert "inner_radius: violates" in out
        with open(osp.join(outdir, "notchkin.log")) as f:
            assert "cmd_validate failed!" in f.read()

    def test_missing_file(self, capsys, outdir):
        status, _, err = run(capsys, "validate", "--tube", osp.join(outdir, "none.json"),
                             "--out", outdir)
        assert status == 2
        assert err.startswith("error:")

    def test_missing_flag(self, capsys, outdir):
        status, _, err = run(capsys, "validate", "--out", outdir)
        assert status == 2
        assert "--tube" in err

    def test_malformed_json(self, capsys, outdir):
        path = osp.join(outdir, "broken.json")
        with open(path, "w") as f:
            f.write("{not json")
        status, _, _ = run(capsys, "validate", "--tube", path, "--out", outdir)
        assert status == 2

    @pytest.mark.parametrize("value", ["0.75", None])
    def test_mistyped_field(self, capsys, outdir, tube1, value):
        path = osp.join(outdir, "mistyped.json")
        data = tube_to_dict(tube1)
        data["outer_radius"] = value
        with open(path, "w") as f:
            json.dump(data, f)
        status, _, err = run(capsys, "validate", "--tube", path, "--out", outdir)
        assert status == 2
        assert "outer_radius" in err

    def test_missing_config(self, capsys, outdir):
        status, _, _ = run(capsys, "validate", "--tube", "tube1", "--out", outdir,
                           "--config", osp.join(outdir, "nope.ini"))
        assert status == 2


class TestPredict:
    def test_engaged(self, capsys, outdir):
        status, out, _ = run(capsys, "predict", "--tube", "tube1", "--tendon", "tendon",
                             "--stroke", "2.0", "--force", "1.0", "--out", outdir)
        assert status == 0
        assert out.startswith("theta = 98.51")

    def test_not_engaged(self, capsys, outdir):
        status, out, _ = run(capsys, "predict", "--tube", "tube1", "--tendon", "tendon",
                             "--stroke", "0.3", "--force", "1.0", "--out", outdir)
        assert status == 0
        assert out.startswith("theta = 0.0000 deg")
        assert "not engaged" in out

    def test_at_rest(self, capsys, outdir):
        status, out, _ = run(capsys, "predict", "--tube", "tube1", "--tendon", "tendon",
                             "--out", outdir)
        assert status == 0
        assert out.startswith("theta = 0.0000 deg")
        assert "not engaged" not in out

    def test_sweep(self, capsys, outdir):
        status, _, _ = run(capsys, "predict", "--tube", "tube2", "--tendon", "tendon",
                           "--force", "0.5", "--sweep", "--resolution", "21",
                           "--out", outdir)
        assert status == 0
        frame = pd.read_csv(osp.join(outdir, "sweep.csv"))
        assert list(frame.columns) == ["stroke_mm", "deflection_deg", "deflection_rad",
                                       "engaged"]
        assert len(frame) == 21
        assert frame["stroke_mm"].iloc[-1] == pytest.approx(2.5)
        assert not frame["engaged"].iloc[0]
        assert frame["engaged"].iloc[-1]
        for name in ("sweep.svg", "shape.svg"):
            assert osp.exists(osp.join(outdir, name))

    def test_missing_tendon(self, capsys, outdir):
        status, _, _ = run(capsys, "predict", "--tube", "tube1", "--out", outdir)
        assert status == 2

    def test_negative_force(self, capsys, outdir):
        status, _, err = run(capsys, "predict", "--tube", "tube1", "--tendon", "tendon",
                             "--stroke", "1.0", "--force", "-1.0", "--out", outdir)
        assert status == 1
        assert "non-negative" in err


class TestToolpath:
    def test_preset(self, capsys, outdir):
        status, out, _ = run(capsys, "toolpath", "--tube", "tube1",
                             "--recipe", "recipe_tube1", "--out", outdir)
        assert status == 0
        assert out.strip().splitlines()[-1] == "352"
        with open(osp.join(outdir, "job.json")) as f:
            assert json.load(f)["trace_count"] == 352
        assert osp.exists(osp.join(outdir, "pattern.svg"))

    def test_single_notch(self, capsys, outdir, tube1):
        path = osp.join(outdir, "single.json")
        dump_tube(replace(tube1, notch_count=1, tip_margin=0.0, hole_offset=1.0), path)
        status, out, _ = run(capsys, "toolpath", "--tube", path, "--recipe", "recipe_tube1",
                             "--repeats", "1", "--out", outdir)
        assert status == 0
        assert out.strip().splitlines()[-1] == "16"

    def test_overlap(self, capsys, outdir, tube1):
        path = osp.join(outdir, "overlap.json")
        dump_tube(replace(tube1, hole_offset=1.2), path)
        status, _, err = run(capsys, "toolpath", "--tube", path, "--recipe", "recipe_tube1",
                             "--out", outdir)
        assert status == 1
        assert "overlaps notch 0" in err
        assert not osp.exists(osp.join(outdir, "job.json"))


class TestSynthAndFit:
    def test_seeded(self, capsys, outdir):
        paths = [osp.join(outdir, name) for name in ("a.csv", "b.csv")]
        for path in paths:
            status, _, _ = run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon",
                               "--seed", "42", "--trials", path, "--out", outdir)
            assert status == 0
        with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
            assert a.read() == b.read()
        assert len(segment_cycles(load_trials(paths[0]))) == 50

    def test_default_output(self, capsys, outdir):
        status, out, _ = run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon",
                             "--cycles", "3", "--out", outdir)
        assert status == 0
        assert osp.exists(osp.join(outdir, "trials.csv"))
        assert "Wrote 1201 records" in out

    def test_bad_flags(self, capsys, outdir):
        status, _, _ = run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon",
                           "--cycles", "0", "--out", outdir)
        assert status == 1
        status, _, _ = run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon",
                           "--slack", "3.0", "--out", outdir)
        assert status == 1

    def test_fit(self, capsys, outdir):
        trials = osp.join(outdir, "trials.csv")
        run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon", "--seed", "42",
            "--trials", trials, "--out", outdir)
        status, out, _ = run(capsys, "fit", "--tube", "tube2", "--tendon", "tendon",
                             "--trials", trials, "--out", outdir)
        assert status == 0
        with open(osp.join(outdir, "fit.json")) as f:
            result = json.load(f)
        assert result["e_t_mpa"] == pytest.approx(28000.0, rel=0.05)
        assert result["deadband_mm"] == pytest.approx(0.3, abs=0.01)
        assert result["rmse_deg"] < 1.0
        assert "E_t = " in out
        for name in ("fit.svg", "cycles_1.svg"):
            assert osp.exists(osp.join(outdir, name))

    def test_fit_noise_free(self, capsys, outdir):
        trials = osp.join(outdir, "trials.csv")
        run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon", "--noise", "0",
            "--trials", trials, "--out", outdir)
        status, _, _ = run(capsys, "fit", "--tube", "tube2", "--tendon", "tendon",
                           "--trials", trials, "--out", outdir)
        assert status == 0
        with open(osp.join(outdir, "fit.json")) as f:
            result = json.load(f)
        assert result["e_t_mpa"] == pytest.approx(28000.0, rel=1e-3)
        assert result["rmse_deg"] < 1e-6

    def test_fit_zero_tension(self, capsys, outdir):
        trials = osp.join(outdir, "trials.csv")
        run(capsys, "synth", "--tube", "tube2", "--tendon", "tendon", "--stiffness", "0",
            "--trials", trials, "--out", outdir)
        status, _, err = run(capsys, "fit", "--tube", "tube2", "--tendon", "tendon",
                             "--trials", trials, "--out", outdir)
        assert status == 1
        assert "fit stage failed" in err

    def test_fit_bad_trial(self, capsys, outdir):
        trials = osp.join(outdir, "trials.csv")
        with open(trials, "w") as f:
            f.write("time_s,stroke_mm,force_n,deflection_deg\n0,0,-1,0\n")
        status, _, _ = run(capsys, "fit", "--tube", "tube2", "--tendon", "tendon",
                           "--trials", trials, "--out", outdir)
        assert status == 2


def test_presets_are_valid():
    for name in ("tube1", "tube2", "tube3"):
        assert load_tube(preset_path(name)).max_stroke > 0


def test_verbose_handler_removed(capsys, outdir):
    package_log = logging.getLogger("notchkin")
    handlers, level = list(package_log.handlers), package_log.level
    for _ in range(2):
        status, _, err = run(capsys, "-v", "validate", "--tube", "tube1", "--out", outdir)
        assert status == 0
        assert err.count("Loaded tube") == 1
    assert package_log.handlers == handlers
    assert package_log.level == level
