"""The golden-angle spiral source and its Fibonacci OAM content.

Run with ``python3 demos/04_spiral_spectrum.py`` (a few seconds).
"""

# %% Geometry and far field
import numpy as np

from fibqkd.spiral import classify_peaks, far_field, fig1_geometry, fourier_hankel, vogel_points

g = fig1_geometry()
field = far_field(g)
print(f"{g.n_particles} particles; E at the centre = {field.field[0, 0]}")

# %% Azimuthal spectrum
spectrum = fourier_hankel(field, 100)
peaks = classify_peaks(spectrum, 0.5)
print("peaks above half of the largest:", [(p.m, round(p.relative, 2)) for p in peaks])
top = spectrum.S.max()
for m in (0, 8, 13, 21, 34, 40, 55, 70, 89):
    bar = "#" * int(40 * spectrum.at(m) / top)
    print(f"  m={m:3d} {bar}")

# %% A right-angle lattice for contrast
square = far_field(vogel_points(2000, 9.28, np.pi / 2), n_r=128)
ms = [p.m for p in classify_peaks(fourier_hankel(square, 100), 0.5)]
print(f"alpha = 90 deg: {len(ms)} peaks, all multiples of 4: {all(m % 4 == 0 for m in ms)}")
