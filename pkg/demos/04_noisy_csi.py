"""Noisy channel estimates.

An estimation variance of 2e-6 squared-gain units means a standard deviation
around 1.4e-3, roughly fifty times the gains themselves. The receiver then
thresholds on what is essentially noise, and the BER sits near one half at
every SNR. Smaller variances show the error floor forming.
"""
from noma_vlc.analytic import EvalStats
from noma_vlc.experiments import analytic_curve
from noma_vlc.montecarlo import CsiErrorModel, LinkConfig, run_trials

grid = [110.0, 120.0, 130.0]
for var in (1e-12, 1e-11, 2e-6):
    cfg = LinkConfig(csi=CsiErrorModel.noisy_fixed(var))
    stats = EvalStats()
    closed = analytic_curve(cfg, grid, "analytic", stats_=stats).ber
    quad = analytic_curve(cfg, grid, "quadrature").ber
    mc = run_trials(cfg, grid, seed=2, bits_per_user=200_000).ber
    print(f"variance {var:g}  (closed form terms {stats.closed_form_terms}, quadrature fallbacks {stats.fallback_terms})")
    for i, snr in enumerate(grid):
        print(f"  {snr:5.1f} dB  U1 closed {closed[i, 0]:.3e}  quad {quad[i, 0]:.3e}  mc {mc[i, 0]:.3e}")

sd = run_trials(LinkConfig(csi=CsiErrorModel.noisy_snr_dependent()), grid, seed=2, bits_per_user=200_000)
print("\nvariance shrinking with SNR, U1:", sd.ber[:, 0].round(4).tolist())
