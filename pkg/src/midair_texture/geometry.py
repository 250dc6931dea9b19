"""Transducer array layout and acoustic medium constants.

The default array is eight 249-element units (18 x 14 grid, three sites
left empty) tiled 4 x 2 in the xz-plane and facing +y, so the workspace is
the half-space y > 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "ConfigurationError",
    "Medium",
    "TransducerPose",
    "UnitLayout",
    "ArrayConfig",
    "ArrayGeometry",
    "build_array",
    "wavelength",
    "default_unit_transforms",
    "load_array_config",
    "array_config_to_dict",
]


class ConfigurationError(ValueError):
    """Raised for an invalid array or medium configuration."""


@dataclass(frozen=True)
class Medium:
    speed_of_sound: float = 346.0  # m/s, air at ~25 degC
    carrier_frequency: float = 40e3  # Hz
    air_density: float = 1.18  # kg/m^3

    def __post_init__(self):
        for name in ("speed_of_sound", "carrier_frequency", "air_density"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigurationError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def wavelength(self) -> float:
        return self.speed_of_sound / self.carrier_frequency

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength


def wavelength(medium: Medium) -> float:
    """Carrier wavelength in metres."""
    return medium.speed_of_sound / medium.carrier_frequency


@dataclass(frozen=True)
class TransducerPose:
    position: tuple[float, float, float]
    normal: tuple[float, float, float]

    def __post_init__(self):
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
            raise ConfigurationError(f"transducer normal {self.normal} is not unit length")


@dataclass(frozen=True)
class UnitLayout:
    """Grid of transducer sites inside one unit, in the unit's local frame.

    Sites lie in the local xz-plane (columns along x, rows along z) and
    radiate along local +y. ``gaps`` lists (column, row) sites left empty.
    """

    columns: int = 18
    rows: int = 14
    gaps: tuple[tuple[int, int], ...] = ((1, 1), (2, 1), (16, 1))

    @property
    def count(self) -> int:
        return self.columns * self.rows - len(set(self.gaps))

    def sites(self) -> list[tuple[int, int]]:
        gaps = set(self.gaps)
        return [(c, r) for r in range(self.rows) for c in range(self.columns) if (c, r) not in gaps]


def default_unit_transforms(
    pitch: float = 10.16e-3, layout: UnitLayout = UnitLayout(), tiles: tuple[int, int] = (4, 2)
) -> tuple[np.ndarray, ...]:
    """Coplanar tiling facing +y, centred on the origin.

    Units abut so the grid pitch continues across unit boundaries.
    ``tiles`` is (count along x, count along z).
    """
    nx, nz = tiles
    span_x = (nx * layout.columns - 1) * pitch
    span_z = (nz * layout.rows - 1) * pitch
    transforms = []
    for iz in range(nz):
        for ix in range(nx):
            m = np.eye(4)
            m[0, 3] = ix * layout.columns * pitch - span_x / 2
            m[2, 3] = iz * layout.rows * pitch - span_z / 2
            transforms.append(m)
    return tuple(transforms)


@dataclass(frozen=True)
class ArrayConfig:
    pitch: float = 10.16e-3
    layout: UnitLayout = field(default_factory=UnitLayout)
    unit_poses: tuple[np.ndarray, ...] = field(default_factory=default_unit_transforms)

    @property
    def units(self) -> int:
        return len(self.unit_poses)

    @property
    def transducers_per_unit(self) -> int:
        return self.layout.count

    @property
    def all_poses(self) -> list[TransducerPose]:
        positions, normals = _layout_arrays(self)
        return [TransducerPose(tuple(p), tuple(n)) for p, n in zip(positions, normals)]


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Flat transducer list ready for numerics. Arrays are read-only."""

    positions: np.ndarray  # (n, 3) m
    normals: np.ndarray  # (n, 3)
    medium: Medium = Medium()
    pitch: float = 10.16e-3

    def __post_init__(self):
        self.positions.setflags(write=False)
        self.normals.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def count(self) -> int:
        return len(self.positions)

    @property
    def center(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def translated(self, offset) -> ArrayGeometry:
        return ArrayGeometry(self.positions + np.asarray(offset, float), self.normals.copy(), self.medium, self.pitch)


def _layout_arrays(config: ArrayConfig) -> tuple[np.ndarray, np.ndarray]:
    sites = config.layout.sites()
    local = np.array([[c * config.pitch, 0.0, r * config.pitch, 1.0] for c, r in sites]).reshape(-1, 4)
    positions, normals = [], []
    for pose in config.unit_poses:
        pose = np.asarray(pose, dtype=float)
        if pose.shape != (4, 4):
            raise ConfigurationError(f"unit transform must be 4x4, got shape {pose.shape}")
        rot = pose[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise ConfigurationError("unit transform rotation is not orthonormal")
        positions.append((local @ pose.T)[:, :3])
        n = rot @ np.array([0.0, 1.0, 0.0])
        normals.append(np.tile(n / np.linalg.norm(n), (len(sites), 1)))
    if not positions:
        return np.zeros((0, 3)), np.zeros((0, 3))
    return np.vstack(positions), np.vstack(normals)


def build_array(config: ArrayConfig = ArrayConfig(), medium: Medium = Medium()) -> ArrayGeometry:
    """Expand a unit configuration into the flat transducer list.

    Ordering is unit-major, then row-major within a unit.
    """
    if config.units == 0:
        raise ConfigurationError("array has zero units")
    if config.pitch <= 0:
        raise ConfigurationError("pitch must be > 0")
    if config.transducers_per_unit <= 0:
        raise ConfigurationError("unit layout has no transducer sites")
    positions, normals = _layout_arrays(config)
    if len(positions) > 1:
        pairs = cKDTree(positions).query_pairs(0.9 * config.pitch)
        if pairs:
            i, j = min(pairs)
            raise ConfigurationError(
                f"transducers {i} and {j} overlap: distance "
                f"{np.linalg.norm(positions[i] - positions[j]):.6g} m < 0.9 x pitch"
            )
    assert len(positions) == config.units * config.transducers_per_unit
    return ArrayGeometry(positions, normals, medium, config.pitch)


def single_transducer(position=(0.0, 0.0, 0.0), normal=(0.0, 1.0, 0.0), medium: Medium = Medium()) -> ArrayGeometry:
    """One-element geometry, handy for tests and directivity plots."""
    n = np.asarray(normal, float)
    TransducerPose(tuple(position), tuple(n))
    return ArrayGeometry(np.array([position], float), n[None, :].copy(), medium)


def load_array_config(source) -> tuple[ArrayConfig, Medium]:
    """Read an array configuration JSON document.

    Keys: ``units`` (optional count check), ``pitch_mm``, ``unit_transforms``
    (list of 4x4 row-major matrices, nested or flat, translations in mm),
    optional ``layout`` {columns, rows, gaps} and ``medium``
    {speed_of_sound_m_s, carrier_frequency_hz, air_density_kg_m3}.
    ``source`` is a path or an already-parsed mapping.
    """
    if isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = dict(source)
    try:
        pitch = float(doc.get("pitch_mm", 10.16)) * 1e-3
        lay = doc.get("layout", {})
        layout = UnitLayout(
            columns=int(lay.get("columns", 18)),
            rows=int(lay.get("rows", 14)),
            gaps=tuple(tuple(int(v) for v in g) for g in lay.get("gaps", UnitLayout().gaps)),
        )
        if "unit_transforms" in doc:
            transforms = []
            for m in doc["unit_transforms"]:
                m = np.asarray(m, float).reshape(4, 4).copy()
                m[:3, 3] *= 1e-3
                transforms.append(m)
            transforms = tuple(transforms)
        else:
            transforms = default_unit_transforms(pitch, layout)
        med = doc.get("medium", {})
        medium = Medium(
            speed_of_sound=float(med.get("speed_of_sound_m_s", Medium.speed_of_sound)),
            carrier_frequency=float(med.get("carrier_frequency_hz", Medium.carrier_frequency)),
            air_density=float(med.get("air_density_kg_m3", Medium.air_density)),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigurationError(f"malformed array configuration: {exc}") from exc
    if "units" in doc and int(doc["units"]) != len(transforms):
        raise ConfigurationError(f"units={doc['units']} but {len(transforms)} unit_transforms given")
    return ArrayConfig(pitch=pitch, layout=layout, unit_poses=transforms), medium


def array_config_to_dict(config: ArrayConfig, medium: Medium = Medium()) -> dict:
    transforms = []
    for m in config.unit_poses:
        m = np.asarray(m, float).copy()
        m[:3, 3] *= 1e3
        transforms.append(m.tolist())
    return {
        "units": config.units,
        "pitch_mm": config.pitch * 1e3,
        "layout": {
            "columns": config.layout.columns,
            "rows": config.layout.rows,
            "gaps": [list(g) for g in config.layout.gaps],
        },
        "unit_transforms": transforms,
        "medium": {
            "speed_of_sound_m_s": medium.speed_of_sound,
            "carrier_frequency_hz": medium.carrier_frequency,
            "air_density_kg_m3": medium.air_density,
        },
    }
