"""
Radiation force at the focus
----------------------------

The force on a reflecting patch grows with the square of the rms pressure.
Here the focal force of the full array is integrated over a 1 cm^2 patch.
"""

import numpy as np

from midair_texture.field import radiation_force, spot_force
from midair_texture.geometry import build_array
from midair_texture.synthesis import DriveFrame, phases_for_focus

array = build_array()
focus = (0.0, 0.2, 0.0)
phases = phases_for_focus(array, focus)

for level in (0.25, 0.5, 1.0):
    drive = DriveFrame(0.0, np.full(array.count, level), phases)
    print(f"amplitude {level:4.2f}: {spot_force(array, drive, focus) * 1e3:6.2f} mN")

# %%
# Doubling the pressure quadruples the force.

print(radiation_force(2000.0, 1e-4) / radiation_force(1000.0, 1e-4))
