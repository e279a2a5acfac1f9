"""
What feedback quality is worth at the transmitter
=================================================

Four single-antenna users feed back their channel directions; the
transmitter zero-forces on whatever it has.  Perfect knowledge nulls all
inter-user interference; quantized feedback leaves residual interference
that caps the rate.  Predictive tracking closes most of the gap at slow
fading.
"""

import numpy as np

from grasspc import (
    CompositeChannel,
    SumRateConfig,
    evaluate_sum_rate,
    run_sumrate_experiment,
    zf_beamformers,
)

# One channel use, by hand: orthogonal channels make zero-forcing
# trivially interference-free, so each user sees SINR = P/U.
channels = CompositeChannel(np.eye(4, dtype=complex))
beams = zf_beamformers(channels)
result = evaluate_sum_rate(channels, beams, snr_db=10.0)
print(f"orthogonal channels at 10 dB: per-user SINR {result.per_user_sinr.round(3)}, "
      f"sum rate {result.sum_rate:.4f} bits/s/Hz")

# The Monte-Carlo comparison at demo scale (the full experiment settings
# live in configs/sumrate.ini).
config = SumRateConfig(
    snr_db_grid=(0.0, 10.0, 20.0, 30.0),
    fdts_grid=(0.001, 0.04),
    trials=60,
    steps=40,
    discard=20,
    seed=1,
)
rows = run_sumrate_experiment(config)

print("\nscheme               fdts    " + "".join(f"{s:>8.0f} dB" for s in config.snr_db_grid))
for scheme in ("perfect_csi", "memoryless_random", "gpc"):
    for fdts in sorted({r.fdts for r in rows if r.scheme == scheme}):
        cells = {r.snr_db: r.sum_rate_mean for r in rows if r.scheme == scheme and r.fdts == fdts}
        line = "".join(f"{cells[s]:11.2f}" for s in config.snr_db_grid)
        print(f"{scheme:20s} {fdts:5.3f}{line}")

print("\nperfect CSI keeps growing ~4 bits per 3 dB; the memoryless baseline")
print("hits an interference floor; tracking at fdts = 0.001 stays close to")
print("perfect and degrades gracefully as the channel speeds up.")
