import json
import subprocess
import sys

import numpy as np
import pytest

from midair_texture.cli import main
from midair_texture.field import read_pgm


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_presets_json(capsys):
    code, out, _ = run(["presets", "--json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["S-Mix2"]["lambda"] == 0.7 and doc["S-150Hz-w"]["a_am"] == 0.3


def test_render_counts_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["render", "--preset", "S-Mix1", "--duration", "1", "--rate", "1000", "--out", str(d)], capsys)[0] == 0
    assert len((a / "envelope.csv").read_text().splitlines()) == 1001
    for name in ("envelope.csv", "foci.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_render_s_lm_constant(tmp_path, capsys):
    run(["render", "--preset", "S-LM", "--out", str(tmp_path)], capsys)
    amps = {line.split(",")[1] for line in (tmp_path / "envelope.csv").read_text().splitlines()[1:]}
    assert amps == {"1.0"}


def test_render_bad_spec(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"lambda": 3}')
    code, _, err = run(["render", "--spec", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 2 and "lam" in err
    assert run(["render", "--preset", "nope", "--out", str(tmp_path)], capsys)[0] == 2
    assert run(["render", "--out", str(tmp_path)], capsys)[0] == 2


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MIDAIR_TEXTURE_OUT", str(tmp_path / "env"))
    assert run(["render", "--preset", "S-LM"], capsys)[0] == 0
    assert (tmp_path / "env" / "envelope.csv").exists()


def test_field_single_focus(tmp_path, capsys):
    spec = tmp_path / "one.json"
    spec.write_text(json.dumps({"foci_count": 1, "a_am": 0.0}))
    code, _, _ = run(["field", "--spec", str(spec), "--extent-mm", "40", "--step-mm", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    img = read_pgm(tmp_path / "field.pgm")
    r, c = np.unravel_index(np.argmax(img), img.shape)
    # focus sits at (r, 0) in the plane at t = 0; grid spans -20..20 mm
    u, v = (c - 20) * 1e-3, (r - 20) * 1e-3
    assert np.hypot(u - 3.3e-3, v) <= 346 / 40e3


def test_field_zero_amplitude_instant(tmp_path, capsys):
    code, _, _ = run(["field", "--preset", "S-30Hz", "--t", str(1 / 60), "--extent-mm", "10", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert read_pgm(tmp_path / "field.pgm").max() == 0


def test_field_collision_exit_3(tmp_path, capsys):
    arr = tmp_path / "one.json"
    arr.write_text(json.dumps({"pitch_mm": 10, "layout": {"columns": 1, "rows": 1, "gaps": []},
                               "unit_transforms": [np.eye(4).tolist()]}))
    code, _, err = run(["field", "--preset", "S-LM", "--array", str(arr), "--center-mm", "0", "0", "0",
                        "--extent-mm", "2", "--step-mm", "1", "--out", str(tmp_path)], capsys)
    assert code == 3 and "coincides" in err


def test_session_default_and_verify(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"preset": "S-Mix1"}))
    code, out, _ = run(["session", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 0 and "frames 3888" in out and "tracking events 350" in out
    code, out, _ = run(["session", "--verify", str(tmp_path / "drive.udf")], capsys)
    assert code == 0 and "round-trip OK" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["frame_count"] == 3888 and summary["transducer_count"] == 1992


def test_session_no_contact(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"hand": {"type": "absent"}, "stroke_length_cm": 0, "duration_s": 0.1}))
    code, out, err = run(["session", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 0 and "frames 0" in out and "never contacted" in err


def test_session_schema_errors(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"stroke_speed": 1.8}))
    assert run(["session", str(cfg), "--out", str(tmp_path)], capsys)[0] == 2
    cfg.write_text("[1, 2]")
    assert run(["session", str(cfg), "--out", str(tmp_path)], capsys)[0] == 2
    corrupt = tmp_path / "x.udf"
    corrupt.write_bytes(b"nope")
    assert run(["session", "--verify", str(corrupt)], capsys)[0] == 3


def test_psycho_exp1(tmp_path, capsys):
    code, out, _ = run(["psycho", "exp1", "--threshold", "0.23", "--lapse", "0", "--out", str(tmp_path)], capsys)
    assert code == 0
    est = float((tmp_path / "exp1_estimate.csv").read_text().splitlines()[1].split(",")[3])
    assert abs(est - 0.23) <= 0.02


def test_psycho_exp3_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["psycho", "exp3", "--seed", "7", "--out", str(d)], capsys)[0] == 0
    assert (a / "exp3_schedule.csv").read_bytes() == (b / "exp3_schedule.csv").read_bytes()


def test_psycho_fit(tmp_path, capsys):
    x = np.linspace(0, 1, 11)
    rows = ["stimulus,a_am,intensity"] + [f"S-30Hz,{float(v)!r},{float(93.4 * v + 2.0)!r}" for v in x]
    (tmp_path / "syn.csv").write_text("\n".join(rows) + "\n")
    code, out, _ = run(["psycho", "exp2-fit", "--input", str(tmp_path / "syn.csv"), "--out", str(tmp_path)], capsys)
    assert code == 0
    r2 = float((tmp_path / "exp2_fit.csv").read_text().splitlines()[1].split(",")[5])
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_psycho_unknown_tag(capsys):
    code, _, err = run(["psycho", "exp9"], capsys)
    assert code == 2 and "exp1" in err


def test_verify_exit_codes(tmp_path, capsys):
    assert run(["verify", "--preset", "S-Mix2"], capsys)[0] == 0
    run(["render", "--preset", "S-Mix1", "--out", str(tmp_path)], capsys)
    code, out, _ = run(["verify", "--preset", "S-Mix2", "--envelope", str(tmp_path / "envelope.csv")], capsys)
    assert code == 3 and "FAIL" in out


def test_argparse_usage_error_is_2():
    with pytest.raises(SystemExit) as exc:
        main(["render", "--rate", "fast"])
    assert exc.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "midair_texture", "presets"], capture_output=True, text=True)
    assert r.returncode == 0 and "S-Mix2" in r.stdout
