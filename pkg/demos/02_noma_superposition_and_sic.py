"""Fixed power allocation, superposition, and successive cancellation.

With rho = 0.3 each level is well clear of the sum of the levels below it, so
a noiseless receiver peels every bit off exactly. Adding noise shows where
the cascade starts to fail.
"""
import itertools

import numpy as np

from noma_vlc.link import fpa_allocate, sic_decode, superimpose

alloc = fpa_allocate(0.25, 0.3, 3)
print("power ladder (W):", np.round(alloc.powers, 6), "sum", sum(alloc.powers))

h = 5.272e-5
for bits in itertools.product((0, 1), repeat=3):
    y = h * superimpose(bits, alloc)
    _, trace = sic_decode(y, 3, alloc, h)
    print(bits, "->", trace)

rng = np.random.default_rng(0)
sigma = 0.25 / 10 ** (110 / 20)
trials = 20_000
wrong = 0
for _ in range(trials):
    bits = rng.integers(0, 2, 3)
    y = h * superimpose(bits, alloc) + rng.normal(0, sigma)
    wrong += sic_decode(y, 3, alloc, h)[0] != bits[2]
print(f"\nU3 at 110 dB transmit SNR: {wrong / trials:.4f} bit error rate over {trials} symbols")
