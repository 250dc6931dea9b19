"""Midair ultrasound tactile rendering from pressure and vibration components.

Modules
-------
geometry    transducer array layout and medium constants
stimulus    rotating-foci trajectory, amplitude envelope, presets
synthesis   per-transducer drive frames
field       pressure field simulation, focal metrics, radiation force
session     tracking/frame loop and UDF1 drive logs
psychophys  staircase, schedules, synthetic observers, intensity fits
analysis    spectral checks of rendered envelopes
"""

from .geometry import ArrayConfig, ArrayGeometry, Medium, build_array, wavelength
from .stimulus import StimulusSpec, envelope_at, preset, render_stimulus, trajectory_at
from .synthesis import DriveFrame, drive_for_frame, phases_for_focus, stream_drive

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig",
    "ArrayGeometry",
    "Medium",
    "build_array",
    "wavelength",
    "StimulusSpec",
    "envelope_at",
    "preset",
    "render_stimulus",
    "trajectory_at",
    "DriveFrame",
    "drive_for_frame",
    "phases_for_focus",
    "stream_drive",
]
