"""Analog versus VOOK dimming.

Analog dimming scales every power level and loses SNR. VOOK keeps the
levels and repeats each bit over the data slots of a 10-slot codeword, so
the BER improves toward 50% brightness at the cost of throughput.
"""
from noma_vlc.analytic import ber_vook
from noma_vlc.link import DimmingConfig, frame_vook
from noma_vlc.montecarlo import LinkConfig, run_trials, snr_to_sigma

for gd in (0.1, 0.3, 0.5, 0.7, 0.9):
    cfg = DimmingConfig("vook", gd)
    print(f"gamma_d {gd}: codeword {cfg.codeword}  duty {cfg.duty_cycle}  n {cfg.redundancy}  "
          f"frame of 1,0 -> {frame_vook([1, 0], cfg)[:10].tolist()}")

snr = [115.0]
print("\nanalog, 115 dB")
for gd in (0.2, 0.6, 1.0):
    mc = run_trials(LinkConfig(dimming=DimmingConfig("analog", gd)), snr, seed=4, bits_per_user=100_000)
    print(f"  gamma_d {gd}: {mc.ber[0].round(4).tolist()}")

print("VOOK, 115 dB (mc, then closed form)")
for gd in (0.1, 0.3, 0.5):
    link = LinkConfig(dimming=DimmingConfig("vook", gd))
    mc = run_trials(link, snr, seed=4, bits_per_user=100_000)
    s = snr_to_sigma(115.0, 0.25)
    ana = [ber_vook(k, link.allocation(), h, s, link.dimming.redundancy) for k, h in enumerate(link.gains, 1)]
    print(f"  gamma_d {gd}: {mc.ber[0].round(4).tolist()}  {[round(a, 4) for a in ana]}")
