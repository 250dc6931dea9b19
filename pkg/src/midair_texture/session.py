"""Simulated interaction loop and drive-log persistence.

Time is logical: tracking ticks fire at k / tracking_rate and foci frames at
j / frame_rate. Each frame uses the contact centre sampled at the latest
tracking tick, so palm height is only refreshed at the tracking rate.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .geometry import ArrayGeometry, build_array
from .stimulus import FociFrame, StimulusSpec, envelope_at, frame_count, trajectory_at
from .synthesis import TWO_PI, DriveFrame, stack_drive, stream_drive

__all__ = [
    "NoContact",
    "DriveLogFormatError",
    "HandState",
    "TrackingEvent",
    "SessionConfig",
    "SessionLog",
    "stationary_hand",
    "sweeping_hand",
    "absent_hand",
    "contact_center",
    "run_stroke_session",
    "write_drive_log",
    "read_drive_log",
    "encode_drive_log",
    "decode_drive_log",
]

logger = logging.getLogger(__name__)

MAGIC = b"UDF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIdQ")


class NoContact(Exception):
    """The hand is not touching the virtual object; no stimulus is due."""


class DriveLogFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class HandState:
    palm_center: tuple[float, float, float]
    y_hand: float
    in_contact: bool = True

    def __post_init__(self):
        if not math.isfinite(self.y_hand):
            raise ValueError("y_hand must be finite")


@dataclass(frozen=True)
class TrackingEvent:
    t: float
    hand: HandState
    center: tuple[float, float, float] | None  # None when not in contact


HandScript = Callable[[float], HandState]


def stationary_hand(y: float = 0.2, x: float = 0.0, z: float = 0.0) -> HandScript:
    def script(t: float) -> HandState:
        return HandState((x, y, z), y, True)
    return script


def sweeping_hand(y: float = 0.2, x0: float = 0.0, speed: float = 0.018, z: float = 0.0,
                  contact_window: tuple[float, float] | None = None) -> HandScript:
    """Palm moving along x at ``speed``; in contact only inside ``contact_window`` if given."""
    def script(t: float) -> HandState:
        inside = contact_window is None or contact_window[0] <= t < contact_window[1]
        return HandState((x0 + speed * t, y, z), y, inside)
    return script


def absent_hand(y: float = 0.2) -> HandScript:
    def script(t: float) -> HandState:
        return HandState((0.0, y, 0.0), y, False)
    return script


@dataclass(frozen=True)
class SessionConfig:
    """Stroke session parameters.

    The stimulus centre starts at ``sphere_center_xz[0] - stroke_length / 2``
    and advances along +x at ``stroke_speed``, so the stroke is centred on the
    virtual object.
    """

    sphere_center_xz: tuple[float, float] = (0.0, 0.0)
    stroke_length: float = 0.07
    stroke_speed: float = 0.018
    tracking_rate: float = 90.0
    frame_rate: float = 1000.0
    hand_trajectory: HandScript = field(default_factory=stationary_hand, compare=False)
    duration: float | None = None  # only used when stroke_length == 0

    def __post_init__(self):
        if self.tracking_rate <= 0 or self.frame_rate <= 0:
            raise ValueError("rates must be > 0")
        if self.stroke_length < 0:
            raise ValueError("stroke_length must be >= 0")
        if self.stroke_length > 0 and self.stroke_speed <= 0:
            raise ValueError("stroke_speed must be > 0 for a non-zero stroke")
        if self.stroke_length == 0 and (self.duration is None or self.duration < 0):
            raise ValueError("a zero-length stroke needs a non-negative duration")

    @property
    def session_duration(self) -> float:
        if self.stroke_length > 0:
            return self.stroke_length / self.stroke_speed
        return float(self.duration)

    def center_x(self, t):
        x0 = self.sphere_center_xz[0] - self.stroke_length / 2
        speed = self.stroke_speed if self.stroke_length > 0 else 0.0
        return x0 + speed * np.asarray(t)


@dataclass(eq=False)
class SessionLog:
    tracking_events: list[TrackingEvent]
    drive_frames: list[DriveFrame]
    stimulus: StimulusSpec | None
    foci_frames: list[FociFrame] = field(default_factory=list)
    frame_dt: float = 1e-3
    warnings: list[str] = field(default_factory=list)

    def same_drive(self, other: SessionLog) -> bool:
        return (self.frame_dt == other.frame_dt
                and len(self.drive_frames) == len(other.drive_frames)
                and all(a == b for a, b in zip(self.drive_frames, other.drive_frames)))

    def summary(self) -> dict:
        return {
            "frame_count": len(self.drive_frames),
            "tracking_events": len(self.tracking_events),
            "contact_events": sum(e.center is not None for e in self.tracking_events),
            "frame_dt_s": self.frame_dt,
            "transducer_count": len(self.drive_frames[0]) if self.drive_frames else 0,
            "first_frame_t_s": self.drive_frames[0].time if self.drive_frames else None,
            "last_frame_t_s": self.drive_frames[-1].time if self.drive_frames else None,
            "stimulus": self.stimulus.to_dict() if self.stimulus else None,
            "warnings": list(self.warnings),
        }

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")

    def write_tracking_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "y_hand_m", "in_contact"])
            for e in self.tracking_events:
                w.writerow([repr(e.t), repr(e.hand.y_hand), int(e.hand.in_contact)])


def contact_center(config: SessionConfig, hand: HandState, t: float = 0.0) -> tuple[float, float, float]:
    """(x_c, y_hand, z_c): object centre in x and z, measured palm height in y."""
    if not hand.in_contact:
        raise NoContact("hand is not in contact with the object")
    return (float(config.center_x(t)), float(hand.y_hand), float(config.sphere_center_xz[1]))


def run_stroke_session(config: SessionConfig, spec: StimulusSpec, geometry: ArrayGeometry | None = None,
                       mode: str = "superposition") -> SessionLog:
    """Run the tracking/frame loop over the stroke and synthesise drive frames.

    Frames exist for t in k / frame_rate, k = 0 .. floor(duration * frame_rate) - 1,
    and only while the latest tracking tick reported contact. Modulation and
    rotation phases restart at the onset of each contact interval.
    """
    geometry = geometry if geometry is not None else build_array()
    duration = config.session_duration
    n_track = frame_count(duration, config.tracking_rate)
    n_frames = frame_count(duration, config.frame_rate)

    events = []
    for k in range(n_track):
        t = k / config.tracking_rate
        hand = config.hand_trajectory(t)
        try:
            c = contact_center(config, hand, t)
        except NoContact:
            c = None
        events.append(TrackingEvent(t, hand, c))

    foci_frames = []
    onset = None
    for j in range(n_frames):
        t = j / config.frame_rate
        tick = min(int(math.floor(j * config.tracking_rate / config.frame_rate + 1e-9)), n_track - 1)
        if tick < 0:
            continue
        ev = events[tick]
        if ev.center is None:
            onset = None
            continue
        if onset is None:
            onset = t
        local = t - onset
        foci = trajectory_at(spec, ev.center, local)
        foci_frames.append(FociFrame(t, foci, float(envelope_at(spec, local))))

    warnings = []
    if not foci_frames:
        msg = "hand never contacted the object; no drive frames were produced"
        logger.warning(msg)
        warnings.append(msg)
    drive = stream_drive(geometry, foci_frames, mode)
    return SessionLog(events, drive, spec, foci_frames, 1.0 / config.frame_rate, warnings)


# -- UDF1 drive log ---------------------------------------------------------

def _frame_dtype(n: int) -> np.dtype:
    return np.dtype([("t", "<f8"), ("q", "<u2", (n, 2))])


def encode_drive_log(frames: list[DriveFrame], frame_dt: float) -> bytes:
    n = len(frames[0]) if frames else 0
    if any(len(f) != n for f in frames):
        raise ValueError("all drive frames must have the same transducer count")
    out = bytearray(_HEADER.pack(MAGIC, VERSION, n, float(frame_dt), len(frames)))
    if frames:
        times, amps, phases = stack_drive(frames)
        rec = np.zeros(len(frames), dtype=_frame_dtype(n))
        rec["t"] = times
        rec["q"][..., 0] = np.round(np.clip(amps, 0.0, 1.0) * 65535.0).astype(np.uint16)
        rec["q"][..., 1] = (np.round(phases / TWO_PI * 65536.0).astype(np.int64) % 65536).astype(np.uint16)
        out += rec.tobytes()
    return bytes(out)


def decode_drive_log(data: bytes) -> tuple[list[DriveFrame], float]:
    if len(data) < _HEADER.size:
        raise DriveLogFormatError(f"truncated header: {len(data)} of {_HEADER.size} bytes", len(data))
    magic, version, n, frame_dt, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DriveLogFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise DriveLogFormatError(f"unsupported version {version}", 4)
    dtype = _frame_dtype(n)
    body = len(data) - _HEADER.size
    expected = count * dtype.itemsize
    if body < expected:
        whole = body // dtype.itemsize
        raise DriveLogFormatError(
            f"truncated: header declares {count} frames but only {whole} complete frames present",
            _HEADER.size + whole * dtype.itemsize,
        )
    if body > expected:
        raise DriveLogFormatError(
            f"frame count mismatch: {body - expected} trailing bytes after {count} frames",
            _HEADER.size + expected,
        )
    rec = np.frombuffer(data, dtype=dtype, count=count, offset=_HEADER.size)
    amps = rec["q"][..., 0].astype(float) / 65535.0
    phases = rec["q"][..., 1].astype(float) / 65536.0 * TWO_PI
    frames = [DriveFrame(float(rec["t"][i]), amps[i], phases[i]) for i in range(count)]
    return frames, frame_dt


def write_drive_log(log: SessionLog, path) -> None:
    Path(path).write_bytes(encode_drive_log(log.drive_frames, log.frame_dt))


def read_drive_log(path) -> SessionLog:
    """Drive frames from a UDF1 file; tracking events and stimulus are not stored there."""
    frames, dt = decode_drive_log(Path(path).read_bytes())
    return SessionLog([], frames, None, frame_dt=dt)


def quantize_frames(frames: list[DriveFrame]) -> list[DriveFrame]:
    """Frames as they come back from a UDF1 round trip."""
    return decode_drive_log(encode_drive_log(frames, 1e-3))[0]
