"""Where do the three users stand?

The tabulated gains are treated as anchors. We solve for the radial offset
from the LED axis that reproduces each gain through the Lambertian model,
then show how quickly the gain falls off toward the edge of the receiver's
field of view.
"""
import numpy as np

from noma_vlc.channel import (
    DEFAULT_HEIGHT,
    REFERENCE_FRONTEND,
    REFERENCE_GAINS,
    LinkGeometry,
    channel_gain,
    coverage_radius,
    gain_at_radius,
    radius_for_gain,
)

fe = REFERENCE_FRONTEND
print(f"Lambertian order m = {fe.lambertian_order:.10f}")
print(f"link height {DEFAULT_HEIGHT} m, coverage radius {coverage_radius(fe, DEFAULT_HEIGHT):.3f} m\n")

for i, g in enumerate(REFERENCE_GAINS, start=1):
    r = radius_for_gain(g, fe, DEFAULT_HEIGHT)
    # check through the full geometric model, not the radial shortcut
    geo = LinkGeometry((2.0, 2.0, 3.0), (2.0 + r, 2.0, 3.0 - DEFAULT_HEIGHT))
    print(f"U{i}: target {g:.4e}  radius {r:.4f} m  full model {channel_gain(geo, fe):.4e}")

print("\ngain profile")
for r in np.linspace(0.0, 1.8, 7):
    print(f"  r = {r:4.2f} m   h = {gain_at_radius(r, fe, DEFAULT_HEIGHT):.3e}")
