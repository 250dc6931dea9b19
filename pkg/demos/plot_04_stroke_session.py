"""
Simulating a stroke
-------------------

A palm strokes 7 cm across a virtual object at 1.8 cm/s. Hand tracking runs
at 90 Hz, the array at 1 kHz; the result is a drive log in the UDF1 format.
"""

import tempfile
from pathlib import Path

from midair_texture.session import SessionConfig, read_drive_log, run_stroke_session, write_drive_log
from midair_texture.stimulus import preset

config = SessionConfig()
log = run_stroke_session(config, preset("S-30Hz-s"))
print(f"duration {config.session_duration:.4f} s")
print(f"{len(log.tracking_events)} tracking events, {len(log.drive_frames)} drive frames")

# %%
# Write the log and read it back.

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "stroke.udf"
    write_drive_log(log, path)
    back = read_drive_log(path)
    print(f"{path.stat().st_size / 1e6:.1f} MB, {len(back.drive_frames)} frames, dt {back.frame_dt} s")
