"""Perfect CSI: recursion, exact integration and simulation side by side.

For the first decoded user the recursion is exact. Deeper in the cascade the
stage errors share a single noise sample, which the recursion treats as
independent; the exact oracle shows the size of that gap.
"""
import numpy as np

from noma_vlc.analytic import ber_perfect
from noma_vlc.channel import REFERENCE_GAINS
from noma_vlc.link import fpa_allocate
from noma_vlc.montecarlo import LinkConfig, run_trials, snr_to_sigma
from noma_vlc.oracle import exact_ber

grid = [105.0, 110.0, 115.0, 120.0]
cfg = LinkConfig()
alloc = cfg.allocation()
mc = run_trials(cfg, grid, seed=1, bits_per_user=500_000)

print("snr   user  recursion   exact       monte carlo (stderr)")
for i, snr in enumerate(grid):
    s = snr_to_sigma(snr, cfg.total_power)
    for k, h in enumerate(REFERENCE_GAINS, start=1):
        print(f"{snr:5.1f}  U{k}   {ber_perfect(k, alloc, h, s):.4e}  {exact_ber(k, alloc, h, h, s):.4e}  "
              f"{mc.ber[i, k - 1]:.4e} ({mc.stderr[i, k - 1]:.1e})")

rhos = np.round(np.arange(0.1, 1.0, 0.1), 1)
s = snr_to_sigma(115.0, 0.25)
avg = [np.mean([ber_perfect(k, fpa_allocate(0.25, r, 3), h, s) for k, h in enumerate(REFERENCE_GAINS, 1)])
       for r in rhos]
print("\naverage BER vs rho at 115 dB:", dict(zip(rhos.tolist(), np.round(avg, 4).tolist())))
