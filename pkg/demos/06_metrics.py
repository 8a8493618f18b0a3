"""Pixel metrics on a toy frame pair and jaw correlation on tracks."""

import numpy as np

from exprgan import metrics

rng = np.random.default_rng(0)
gt = rng.uniform(0.2, 0.8, size=(256, 256, 3))
gen = gt.copy()
gen[150:200, 100:160] += np.array([3.0, 4.0, 0.0]) / 255  # mouth region off by (3, 4, 0)
gen[:20] = 0.0  # a broken top border

face = np.zeros((256, 256))
face[60:230, 50:210] = 1.0
mouth = (130.0, 175.0)

print("APD  (whole frame):", round(metrics.apd(gen, gt), 3))
print("FAPD (face mask):  ", round(metrics.fapd(gen, gt, face), 3))
print("MAPD (72x72 mouth):", round(metrics.mapd(gen, gt, mouth), 3))

t = np.arange(100)
track = rng.normal(size=(100, 51))
track[:, 0] = np.sin(0.4 * t)
other = track.copy()
other[:, 0] = 2.0 * track[:, 0] + 0.5 + rng.normal(0, 0.1, 100)
print("jaw PCC after a gain/offset change:", round(metrics.track_jaw_pcc(track, other), 4))
