"""Steady-state pressure field of a driven array.

Each transducer is a baffled circular piston in the far field::

    p(x) = P0 * sum_t a_t * D(theta_t) / d_t * exp(1j * (k d_t + phi_t)) * exp(-alpha d_t)

with D(theta) = 2 J1(ka sin theta) / (ka sin theta). Pressures are relative
(P0 = 1) unless ``source_strength`` is given in Pa*m.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.special import j1

from .geometry import ArrayGeometry, Medium
from .synthesis import DriveFrame, SingularityError

__all__ = [
    "PISTON_RADIUS",
    "CALIBRATED_SOURCE_STRENGTH",
    "GridSpec",
    "FieldMap",
    "FocalMetric",
    "piston_directivity",
    "pressure_at",
    "pressures",
    "field_map",
    "focal_metrics",
    "radiation_force",
    "spot_force",
    "calibrate_source_strength",
]

PISTON_RADIUS = 4.5e-3  # m

# Pa*m per unit drive, amplitude (not rms). Produced by
# calibrate_source_strength() against an 18 x 18, 10 mm pitch array that
# delivers 16 mN over a 20 mm focal disc at 200 mm.
CALIBRATED_SOURCE_STRENGTH = 3.727

# Points per evaluation chunk. Fixed so results never depend on worker count.
_CHUNK = 512


def piston_directivity(x):
    """2 J1(x) / x, using the series 1 - x^2/8 + x^4/192 for |x| < 1e-4."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    series = 1.0 - x * x / 8.0 + x ** 4 / 192.0
    out = np.where(small, series, 2.0 * j1(safe) / safe)
    return float(out) if out.ndim == 0 else out


def _contrib(geometry: ArrayGeometry, points: np.ndarray, piston_radius: float, absorption: float):
    """(M, T) complex transfer from unit drive at each transducer to each point."""
    k = geometry.medium.wavenumber
    diff = points[:, None, :] - geometry.positions[None, :, :]
    d = np.sqrt(np.einsum("mtk,mtk->mt", diff, diff))
    bad = d < 1e-9
    if bad.any():
        m, t = np.argwhere(bad)[0]
        raise SingularityError(f"field point {points[m].tolist()} coincides with transducer {t}")
    cos_t = np.einsum("mtk,tk->mt", diff, geometry.normals) / d
    sin_t = np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, None))
    h = piston_directivity(k * piston_radius * sin_t) / d * np.exp(1j * k * d)
    if absorption:
        h = h * np.exp(-absorption * d)
    return h


def pressures(geometry: ArrayGeometry, drive: DriveFrame | np.ndarray, points, *,
              piston_radius: float = PISTON_RADIUS, source_strength: float = 1.0,
              absorption: float = 0.0, workers: int = 1) -> np.ndarray:
    """Complex pressure at many points, shape (M,).

    ``drive`` is a DriveFrame or a complex per-transducer array.
    """
    q = drive.complex if isinstance(drive, DriveFrame) else np.asarray(drive, complex)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    chunks = [pts[i:i + _CHUNK] for i in range(0, len(pts), _CHUNK)]

    def run(chunk):
        return (_contrib(geometry, chunk, piston_radius, absorption) * q).sum(axis=1)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    out = np.concatenate(parts) if parts else np.zeros(0, complex)
    return out * source_strength


def pressure_at(geometry: ArrayGeometry, drive, point, **kwargs) -> complex:
    return complex(pressures(geometry, drive, np.asarray(point, float)[None], **kwargs)[0])


def coherent_sum(geometry: ArrayGeometry, drive: DriveFrame, point, *, piston_radius: float = PISTON_RADIUS) -> float:
    """sum_t a_t D(theta_t) / d_t, the magnitude reached when every term is in phase."""
    h = _contrib(geometry, np.asarray(point, float)[None], piston_radius, 0.0)[0]
    return float(np.sum(drive.amplitudes * np.abs(h)))


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sampling plane centred on ``origin``.

    Sample (i, j) sits at origin + u_i * axes[0] + v_j * axes[1], with u and v
    spanning [-extent/2, extent/2] in ``resolution`` steps.
    """

    origin: tuple[float, float, float] = (0.0, 0.2, 0.0)
    axes: tuple[tuple[float, float, float], tuple[float, float, float]] = ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    extent: tuple[float, float] = (0.1, 0.1)
    resolution: tuple[int, int] = (101, 101)

    def __post_init__(self):
        a = np.asarray(self.axes, float)
        if a.shape != (2, 3) or not np.allclose(a @ a.T, np.eye(2), atol=1e-9):
            raise ValueError("grid axes must be two orthonormal 3-vectors")
        if self.resolution[0] < 2 or self.resolution[1] < 2:
            raise ValueError("grid resolution must be at least 2 x 2")
        if self.extent[0] <= 0 or self.extent[1] <= 0:
            raise ValueError("grid extent must be positive")

    @classmethod
    def plane(cls, center, extent: float, step: float, axes=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0))) -> GridSpec:
        """Square plane of side ``extent`` sampled every ``step`` metres."""
        n = int(round(extent / step)) + 1
        return cls(tuple(float(c) for c in center), axes, (extent, extent), (n, n))

    @property
    def u(self) -> np.ndarray:
        return np.linspace(-self.extent[0] / 2, self.extent[0] / 2, self.resolution[0])

    @property
    def v(self) -> np.ndarray:
        return np.linspace(-self.extent[1] / 2, self.extent[1] / 2, self.resolution[1])

    def points(self) -> np.ndarray:
        uu, vv = np.meshgrid(self.u, self.v, indexing="ij")
        a = np.asarray(self.axes, float)
        return (np.asarray(self.origin, float) + uu[..., None] * a[0] + vv[..., None] * a[1]).reshape(-1, 3)

    def project(self, point) -> tuple[float, float]:
        a = np.asarray(self.axes, float)
        rel = np.asarray(point, float) - np.asarray(self.origin, float)
        return float(rel @ a[0]), float(rel @ a[1])


@dataclass(frozen=True, eq=False)
class FieldMap:
    grid: GridSpec
    pressure: np.ndarray  # (nu, nv) complex

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.pressure)

    def point(self, i: int, j: int) -> np.ndarray:
        return self.grid.points().reshape(*self.grid.resolution, 3)[i, j]

    def to_csv(self, path) -> None:
        u, v = self.grid.u, self.grid.v
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "v", "re", "im", "abs"])
            for i in range(len(u)):
                for j in range(len(v)):
                    p = self.pressure[i, j]
                    w.writerow([f"{u[i]:.9g}", f"{v[j]:.9g}", f"{p.real:.12g}", f"{p.imag:.12g}", f"{abs(p):.12g}"])

    def to_pgm(self, path) -> None:
        """16-bit binary PGM of |p| / max|p|; image rows follow v, columns follow u."""
        mag = self.magnitude
        peak = mag.max()
        img = np.zeros_like(mag) if peak == 0 else mag / peak
        data = np.round(img.T * 65535).astype(">u2")
        h, w = data.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
            fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(x) for x in parts[1].split())
    maxval = int(parts[2])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[3], dtype=dtype).reshape(h, w)


def field_map(geometry: ArrayGeometry, drive, grid: GridSpec, *, workers: int = 1, **kwargs) -> FieldMap:
    p = pressures(geometry, drive, grid.points(), workers=workers, **kwargs)
    return FieldMap(grid, p.reshape(grid.resolution))


@dataclass(frozen=True)
class FocalMetric:
    target: tuple[float, float, float]
    focused: bool
    peak_index: tuple[int, int] | None = None
    peak_point: tuple[float, float, float] | None = None
    peak_magnitude: float = 0.0
    offset: float = float("inf")
    peak_to_mean: float = 0.0


def local_maxima(mag: np.ndarray) -> np.ndarray:
    """(K, 2) indices of strict-enough 8-neighbour maxima with |p| > 0, strongest first."""
    filt = maximum_filter(mag, size=3, mode="constant", cval=-np.inf)
    idx = np.argwhere((mag == filt) & (mag > 0))
    order = np.argsort(-mag[tuple(idx.T)], kind="stable")
    return idx[order]


def focal_metrics(fmap: FieldMap, targets, wavelength: float = Medium().wavelength) -> list[FocalMetric]:
    """Nearest local maximum to each target, within three wavelengths.

    Targets without such a maximum are reported with ``focused=False``.
    """
    mag = fmap.magnitude
    mean = float(mag.mean())
    peaks = local_maxima(mag)
    pts = fmap.grid.points().reshape(*fmap.grid.resolution, 3)
    peak_pts = pts[tuple(peaks.T)] if len(peaks) else np.zeros((0, 3))
    out = []
    for target in targets:
        target = np.asarray(target, float)
        if not len(peaks):
            out.append(FocalMetric(tuple(target), False))
            continue
        dist = np.linalg.norm(peak_pts - target, axis=1)
        best = int(np.argmin(dist))
        if dist[best] > 3 * wavelength:
            out.append(FocalMetric(tuple(target), False, offset=float(dist[best])))
            continue
        i, j = (int(x) for x in peaks[best])
        out.append(FocalMetric(
            tuple(target), True, (i, j), tuple(peak_pts[best]), float(mag[i, j]),
            float(dist[best]), float(mag[i, j] / mean) if mean > 0 else 0.0,
        ))
    return out


def radiation_force(pressure: float, area: float, medium: Medium = Medium()) -> float:
    """Force on a totally reflecting patch, F = 2 p^2 S / (rho c^2), p being rms pressure."""
    if pressure < 0 or area <= 0:
        raise ValueError("pressure must be >= 0 and area > 0")
    return 2.0 * pressure ** 2 * area / (medium.air_density * medium.speed_of_sound ** 2)


def spot_force(geometry: ArrayGeometry, drive, center, *, side: float = 0.01, step: float = 0.25e-3,
               source_strength: float = CALIBRATED_SOURCE_STRENGTH, disc: bool = False,
               axes=((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)), **kwargs) -> float:
    """Radiation force integrated over a square patch (or inscribed disc) around ``center``.

    Cell-centred midpoint quadrature; the rms pressure over the patch is fed
    to :func:`radiation_force`.
    """
    n = int(round(side / step))
    c = (np.arange(n) + 0.5) * step - side / 2
    uu, vv = np.meshgrid(c, c, indexing="ij")
    keep = (uu ** 2 + vv ** 2 <= (side / 2) ** 2) if disc else np.ones_like(uu, bool)
    a = np.asarray(axes, float)
    pts = np.asarray(center, float) + uu[keep][:, None] * a[0] + vv[keep][:, None] * a[1]
    p = pressures(geometry, drive, pts, source_strength=source_strength, **kwargs)
    area = keep.sum() * step * step
    rms = np.sqrt(np.mean(np.abs(p) ** 2) / 2.0)
    return radiation_force(float(rms), float(area), geometry.medium)


def calibrate_source_strength(geometry: ArrayGeometry, focus, force: float, diameter: float, **kwargs) -> float:
    """Source strength (Pa*m) at which a single focus yields ``force`` over a disc of ``diameter``."""
    from .synthesis import phases_for_focus

    ph = phases_for_focus(geometry, focus)
    drive = DriveFrame(0.0, np.ones(len(geometry)), ph)
    unit = spot_force(geometry, drive, focus, side=diameter, disc=True, source_strength=1.0, **kwargs)
    return float(np.sqrt(force / unit))
