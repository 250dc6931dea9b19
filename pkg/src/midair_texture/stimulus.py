"""Lateral-modulation trajectory, amplitude envelope and the stimulus presets.

A stimulus is N foci circling a centre point at ``f_lm`` Hz (the static
pressure component) whose common amplitude is modulated by a blend of two
raised cosines at ``f_am1`` and ``f_am2`` (the vibration components).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from decimal import Decimal
from pathlib import Path

import numpy as np

__all__ = [
    "StimulusError",
    "StimulusSpec",
    "FociFrame",
    "EnvelopeSeries",
    "PRESET_NAMES",
    "preset",
    "presets",
    "focus_offsets",
    "trajectory_at",
    "envelope_at",
    "render_stimulus",
    "envelope_series",
    "frame_count",
]


class StimulusError(ValueError):
    """Invalid stimulus parameters or an impossible foci geometry."""


@dataclass(frozen=True)
class StimulusSpec:
    f_lm: float = 5.0
    radius: float = 3.3e-3
    spacing: float = 1e-3
    foci_count: int = 5
    f_am1: float = 30.0
    f_am2: float = 150.0
    lam: float = 1.0
    a_am: float = 0.0
    a_max: float = 1.0
    duration: float = 1.0

    def __post_init__(self):
        for name in ("lam", "a_am", "a_max"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise StimulusError(f"{name} must lie in [0, 1], got {v!r}")
        if not self.radius > 0:
            raise StimulusError(f"radius must be > 0, got {self.radius!r}")
        if not self.spacing >= 0:
            raise StimulusError(f"spacing must be >= 0, got {self.spacing!r}")
        if self.spacing > 2 * self.radius:
            raise StimulusError(
                f"spacing {self.spacing!r} m exceeds the circle diameter {2 * self.radius!r} m"
            )
        if int(self.foci_count) != self.foci_count or self.foci_count < 1:
            raise StimulusError(f"foci_count must be a positive integer, got {self.foci_count!r}")
        for name in ("f_lm", "f_am1", "f_am2"):
            if not getattr(self, name) >= 0:
                raise StimulusError(f"{name} must be >= 0")
        if not self.duration >= 0:
            raise StimulusError("duration must be >= 0")

    # JSON keys carry explicit units; mm values are shifted in decimal so
    # that a dump/load cycle is exact.
    _MM_KEYS = {"radius": "radius_mm", "spacing": "spacing_mm"}
    _KEYS = {
        "f_lm": "f_lm_hz",
        "radius": "radius_mm",
        "spacing": "spacing_mm",
        "foci_count": "foci_count",
        "f_am1": "f_am1_hz",
        "f_am2": "f_am2_hz",
        "lam": "lambda",
        "a_am": "a_am",
        "a_max": "a_max",
        "duration": "duration_s",
    }

    def to_json(self) -> str:
        parts = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "foci_count":
                text = str(int(value))
            elif f.name in self._MM_KEYS:
                text = _decimal_text(Decimal(repr(float(value))).scaleb(3))
            else:
                text = repr(float(value))
            parts.append(f"  {json.dumps(self._KEYS[f.name])}: {text}")
        return "{\n" + ",\n".join(parts) + "\n}\n"

    @classmethod
    def from_json(cls, text: str) -> StimulusSpec:
        try:
            doc = json.loads(text, parse_float=Decimal, parse_int=Decimal)
        except json.JSONDecodeError as exc:
            raise StimulusError(f"stimulus JSON is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> StimulusSpec:
        if not isinstance(doc, dict):
            raise StimulusError("stimulus document must be a JSON object")
        known = set(cls._KEYS.values())
        unknown = sorted(set(doc) - known)
        if unknown:
            raise StimulusError(f"unknown stimulus keys {unknown}; expected a subset of {sorted(known)}")
        kwargs = {}
        for name, key in cls._KEYS.items():
            if key not in doc:
                continue
            raw = doc[key]
            if isinstance(raw, bool) or not isinstance(raw, (int, float, Decimal)):
                raise StimulusError(f"{key} must be a number, got {raw!r}")
            if name == "foci_count":
                kwargs[name] = int(raw)
            elif name in cls._MM_KEYS:
                kwargs[name] = float(Decimal(raw).scaleb(-3)) if isinstance(raw, Decimal) else float(raw) / 1e3
            else:
                kwargs[name] = float(raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return json.loads(self.to_json())

    def with_(self, **changes) -> StimulusSpec:
        return replace(self, **changes)


def _decimal_text(d: Decimal) -> str:
    text = format(d.normalize(), "f")
    if "." not in text:
        text += ".0"
    return text


@dataclass(frozen=True, eq=False)
class FociFrame:
    time: float
    foci: np.ndarray  # (N, 3) m
    amplitude: float

    def __eq__(self, other):
        if not isinstance(other, FociFrame):
            return NotImplemented
        return (
            self.time == other.time
            and self.amplitude == other.amplitude
            and np.array_equal(self.foci, other.foci)
        )


@dataclass(frozen=True, eq=False)
class EnvelopeSeries:
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, float)
        if s.size and (s.min() < 0 or s.max() > 1):
            raise StimulusError("envelope samples must lie in [0, 1]")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "amplitude"])
            for t, a in zip(self.times, self.samples):
                w.writerow([repr(float(t)), repr(float(a))])

    @classmethod
    def from_csv(cls, path, sample_rate: float | None = None) -> EnvelopeSeries:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([float(r["t_s"]) for r in rows])
        a = np.array([float(r["amplitude"]) for r in rows])
        if sample_rate is None:
            if len(t) < 2:
                raise StimulusError("cannot infer sample rate from fewer than two rows")
            sample_rate = round(1.0 / float(np.mean(np.diff(t))), 9)
        return cls(sample_rate, a)


# Mixture-set rows are given at full modulation depth, the setting swept
# down from in the threshold and intensity runs.
_BASE = StimulusSpec()
_PRESETS = {
    "S-LM": _BASE.with_(lam=1.0, a_am=0.0),
    "S-30Hz": _BASE.with_(lam=1.0, a_am=1.0),
    "S-150Hz": _BASE.with_(lam=0.0, a_am=1.0),
    "S-Mix1": _BASE.with_(lam=0.5, a_am=1.0),
    "S-Mix2": _BASE.with_(lam=0.7, a_am=1.0),
    "S-30Hz-w": _BASE.with_(lam=1.0, a_am=0.5, duration=0.5),
    "S-30Hz-s": _BASE.with_(lam=1.0, a_am=1.0, duration=0.5),
    "S-150Hz-w": _BASE.with_(lam=0.0, a_am=0.3, duration=0.5),
    "S-150Hz-s": _BASE.with_(lam=0.0, a_am=1.0, duration=0.5),
}
PRESET_NAMES = tuple(_PRESETS)

# Mixture set: threshold and intensity runs. Texture set: discrimination and stroke runs.
PRESET_GROUP = {
    "S-30Hz": "mix",
    "S-150Hz": "mix",
    "S-Mix1": "mix",
    "S-Mix2": "mix+texture",
    "S-LM": "mix+texture",
    "S-30Hz-w": "texture",
    "S-30Hz-s": "texture",
    "S-150Hz-w": "texture",
    "S-150Hz-s": "texture",
}


def preset(name: str) -> StimulusSpec:
    try:
        return _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}") from None


def presets() -> dict[str, StimulusSpec]:
    return dict(_PRESETS)


def focus_offsets(spec: StimulusSpec, rule: str = "chord") -> np.ndarray:
    """Angular offset of each focus on the circle, radians.

    ``"chord"`` spaces neighbours exactly ``spacing`` apart in a straight
    line; ``"arc"`` is the small-angle form spacing them ``spacing`` apart
    along the circle.
    """
    i = np.arange(spec.foci_count)
    if rule == "chord":
        step = 2.0 * math.asin(spec.spacing / (2.0 * spec.radius))
    elif rule == "arc":
        step = spec.spacing / spec.radius
    else:
        raise ValueError(f"unknown spacing rule {rule!r}; use 'chord' or 'arc'")
    return i * step


def trajectory_at(spec: StimulusSpec, center, t, rule: str = "chord") -> np.ndarray:
    """Foci positions at time ``t``; shape (N, 3), or (len(t), N, 3) for array ``t``.

    Angles are counter-clockwise from +x in the xz-plane seen from +y; every
    focus shares the centre's y coordinate.
    """
    center = np.asarray(center, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise StimulusError("t must be >= 0")
    phase = 2.0 * np.pi * spec.f_lm * t_arr[..., None] + focus_offsets(spec, rule)
    out = np.empty(phase.shape + (3,))
    out[..., 0] = center[0] + spec.radius * np.cos(phase)
    out[..., 1] = center[1]
    out[..., 2] = center[2] + spec.radius * np.sin(phase)
    return out


def envelope_at(spec: StimulusSpec, t):
    """Common transducer amplitude: a_max * modulation depth blend."""
    t = np.asarray(t, dtype=float)
    phi1 = 0.5 * (np.cos(2.0 * np.pi * spec.f_am1 * t) + 1.0)
    phi2 = 0.5 * (np.cos(2.0 * np.pi * spec.f_am2 * t) + 1.0)
    mod = spec.a_am * (spec.lam * phi1 + (1.0 - spec.lam) * phi2) + 1.0 - spec.a_am
    a = np.clip(spec.a_max * mod, 0.0, spec.a_max)
    return float(a) if a.ndim == 0 else a


def frame_count(duration: float, rate: float) -> int:
    """Number of ticks k/rate in [0, duration); the 1e-9 guard absorbs fp noise in duration*rate."""
    return max(int(math.floor(duration * rate + 1e-9)), 0)


def render_stimulus(spec: StimulusSpec, center=(0.0, 0.2, 0.0), frame_rate: float = 1000.0,
                    rule: str = "chord") -> list[FociFrame]:
    if not frame_rate > 0:
        raise StimulusError("frame_rate must be > 0")
    n = frame_count(spec.duration, frame_rate)
    t = np.arange(n) / frame_rate
    foci = trajectory_at(spec, center, t, rule)
    amp = np.atleast_1d(envelope_at(spec, t))
    return [FociFrame(float(t[k]), foci[k], float(amp[k])) for k in range(n)]


def envelope_series(spec: StimulusSpec, sample_rate: float = 1000.0) -> EnvelopeSeries:
    n = frame_count(spec.duration, sample_rate)
    t = np.arange(n) / sample_rate
    return EnvelopeSeries(sample_rate, np.atleast_1d(envelope_at(spec, t)))


def write_trajectory_csv(frames: list[FociFrame], path) -> None:
    """One row per (frame, focus): t_s, focus, x_m, y_m, z_m, amplitude."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "focus", "x_m", "y_m", "z_m", "amplitude"])
        for fr in frames:
            for i, p in enumerate(fr.foci):
                w.writerow([repr(fr.time), i + 1, repr(float(p[0])), repr(float(p[1])),
                            repr(float(p[2])), repr(fr.amplitude)])


def load_spec(path) -> StimulusSpec:
    return StimulusSpec.from_json(Path(path).read_text())


def spec_as_row(name: str, spec: StimulusSpec) -> dict:
    d = asdict(spec)
    d["name"] = name
    return d
