import struct

import numpy as np
import pytest

from midair_texture.geometry import ArrayConfig, UnitLayout, build_array
from midair_texture.session import (
    DriveLogFormatError, HandState, NoContact, SessionConfig, SessionLog, absent_hand, contact_center,
    decode_drive_log, encode_drive_log, quantize_frames, read_drive_log, run_stroke_session,
    stationary_hand, sweeping_hand, write_drive_log,
)
from midair_texture.stimulus import StimulusSpec, preset
from midair_texture.synthesis import DriveFrame


@pytest.fixture(scope="module")
def small():
    return build_array(ArrayConfig(pitch=0.01, layout=UnitLayout(4, 4, ()), unit_poses=(np.eye(4),)))


@pytest.fixture(scope="module")
def stroke(small):
    return run_stroke_session(SessionConfig(), preset("S-Mix1"), small)


def test_contact_center_example():
    cfg = SessionConfig(sphere_center_xz=(0.0, 0.0), stroke_length=0.0, duration=1.0)
    assert contact_center(cfg, HandState((0, 0.2, 0), 0.2)) == (0.0, 0.2, 0.0)


def test_no_contact_raises():
    with pytest.raises(NoContact):
        contact_center(SessionConfig(), HandState((0, 0.2, 0), 0.2, False))


def test_non_finite_hand_rejected():
    with pytest.raises(ValueError):
        HandState((0, 0, 0), float("nan"))


def test_stroke_counts(stroke):
    # 0.07 / 0.018 = 3.888... s; floor(3888.9) frames at 1 kHz, floor(349.99..+1) ticks at 90 Hz
    assert SessionConfig().session_duration == pytest.approx(3.8888888889)
    assert len(stroke.drive_frames) == 3888
    assert len(stroke.tracking_events) == 350


def test_stroke_kinematics(stroke):
    # centre starts at -35 mm and advances 1.8 cm/s along x
    cfg = SessionConfig()
    assert cfg.center_x(0.0) == pytest.approx(-0.035)
    assert cfg.center_x(cfg.session_duration) == pytest.approx(0.035)
    e = stroke.tracking_events[90]
    assert e.center[0] == pytest.approx(-0.035 + 0.018 * 1.0)


def test_frames_between_ticks_share_center(stroke):
    s = preset("S-Mix1")
    for j in range(0, 3888):
        f = stroke.foci_frames[j]
        tick = int(np.floor(j * 90 / 1000 + 1e-9))
        c = np.array(stroke.tracking_events[tick].center)
        r = np.hypot(f.foci[:, 0] - c[0], f.foci[:, 2] - c[2])
        assert np.all(np.abs(r - s.radius) < 1e-12)
        assert np.all(f.foci[:, 1] == c[1])


def test_absent_hand_gives_no_frames(small, caplog):
    cfg = SessionConfig(hand_trajectory=absent_hand())
    log = run_stroke_session(cfg, preset("S-LM"), small)
    assert log.drive_frames == [] and log.warnings
    assert "never contacted" in caplog.text


def test_contact_gating_and_onset_reset(small):
    cfg = SessionConfig(stroke_length=0.0, duration=1.0,
                        hand_trajectory=sweeping_hand(contact_window=(0.5, 1.0)))
    spec = StimulusSpec(a_am=1.0, lam=1.0)
    log = run_stroke_session(cfg, spec, small)
    times = np.array([f.time for f in log.foci_frames])
    first_tick = 45  # 45 / 90 = 0.5 s
    assert times[0] == pytest.approx(np.ceil(first_tick / 90 * 1000 - 1e-9) / 1000)
    # envelope restarts at onset: the first frame is at the 30 Hz crest
    assert log.foci_frames[0].amplitude == pytest.approx(1.0)


def test_stationary_session_deterministic(small):
    cfg = SessionConfig(stroke_length=0.0, duration=0.2, hand_trajectory=stationary_hand(0.18))
    a = run_stroke_session(cfg, preset("S-Mix2"), small)
    b = run_stroke_session(cfg, preset("S-Mix2"), small)
    assert a.same_drive(b)
    assert len(a.drive_frames) == 200 and len(a.tracking_events) == 18


def test_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(tracking_rate=0)
    with pytest.raises(ValueError):
        SessionConfig(stroke_length=0.0)


def test_drive_log_round_trip(tmp_path, stroke):
    path = tmp_path / "d.udf"
    write_drive_log(stroke, path)
    back = read_drive_log(path)
    assert back.frame_dt == 1e-3
    assert len(back.drive_frames) == 3888
    assert back.same_drive(SessionLog([], quantize_frames(stroke.drive_frames), None))
    assert encode_drive_log(back.drive_frames, back.frame_dt) == path.read_bytes()


def test_quantisation_bounds(stroke):
    q = quantize_frames(stroke.drive_frames[:10])
    for a, b in zip(stroke.drive_frames[:10], q):
        assert np.max(np.abs(a.amplitudes - b.amplitudes)) <= 0.5 / 65535 + 1e-15
        d = np.angle(np.exp(1j * (a.phases - b.phases)))
        assert np.max(np.abs(d)) <= np.pi / 65536 + 1e-12


def test_header_layout():
    frames = [DriveFrame(0.0, np.array([1.0, 0.0]), np.array([0.0, np.pi]))]
    data = encode_drive_log(frames, 1e-3)
    assert struct.unpack_from("<4sIIdQ", data) == (b"UDF1", 1, 2, 1e-3, 1)
    assert struct.unpack_from("<dHHHH", data, 28) == (0.0, 65535, 0, 0, 32768)


def test_empty_log_round_trip():
    data = encode_drive_log([], 1e-3)
    assert decode_drive_log(data) == ([], 1e-3)


def test_bad_magic():
    data = bytearray(encode_drive_log([], 1e-3))
    data[:4] = b"XXXX"
    with pytest.raises(DriveLogFormatError) as exc:
        decode_drive_log(bytes(data))
    assert exc.value.offset == 0


def test_truncated_and_trailing():
    frames = [DriveFrame(k * 1e-3, np.ones(3), np.zeros(3)) for k in range(4)]
    data = encode_drive_log(frames, 1e-3)
    rec = 8 + 3 * 4
    with pytest.raises(DriveLogFormatError, match="truncated") as exc:
        decode_drive_log(data[:-5])
    assert exc.value.offset == 28 + 3 * rec
    with pytest.raises(DriveLogFormatError, match="mismatch"):
        decode_drive_log(data + b"\0")
    with pytest.raises(DriveLogFormatError, match="header"):
        decode_drive_log(data[:10])
