"""Landmark alignment, multi-band blending and NMFC colours.

Writes a few PNGs into ``demo_out/`` so the blend seams can be inspected.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from exprgan import compositing as comp

out = Path("demo_out")
out.mkdir(exist_ok=True)

template = comp.mean_face_template()
true = comp.SimilarityTransform2D(scale=0.8, theta=np.radians(12), tx=20.0, ty=-10.0)
landmarks = true.inverse().apply(template)
rng = np.random.default_rng(0)
landmarks_noisy = landmarks + rng.normal(0, 0.5, landmarks.shape)

tf = comp.estimate_similarity(landmarks_noisy, template)
print(f"recovered scale {tf.scale:.4f} theta {np.degrees(tf.theta):.3f} deg "
      f"t=({tf.tx:.2f}, {tf.ty:.2f})")
print("det of linear part:", np.linalg.det(tf.linear).round(4))

# smoothing over jittered detections
jitter = [landmarks + rng.normal(0, 1.0, landmarks.shape) for _ in range(8)]
print("landmark error, one detection vs mean of 8:",
      np.abs(jitter[0] - landmarks).mean().round(3),
      np.abs(comp.smooth_landmarks(jitter) - landmarks).mean().round(3))

# blend a striped face patch onto a gradient background
H = W = 128
yy, xx = np.mgrid[:H, :W] / H
fg = np.stack([0.5 + 0.5 * np.sin(20 * xx), 0.3 * np.ones_like(xx), yy], axis=-1)
bg = np.stack([xx, 1 - yy, 0.5 * np.ones_like(xx)], axis=-1)
mask = (((xx - 0.5) / 0.3) ** 2 + ((yy - 0.5) / 0.4) ** 2 <= 1).astype(float)
soft = comp.erode_soft(mask, radius=4)

for name, img in [("hard_alpha", mask[..., None] * fg + (1 - mask[..., None]) * bg),
                  ("multiband", comp.multiband_blend(fg, bg, soft))]:
    Image.fromarray((np.clip(img, 0, 1) * 255).round().astype(np.uint8)).save(out / f"{name}.png")
print("levels used by default:", comp.default_blend_levels(fg.shape))

_, lap = comp.build_pyramids(fg, 5)
print("pyramid collapse error:", np.abs(comp.collapse(lap) - fg).max())

verts = rng.normal(size=(1000, 3)) * [1.0, 1.3, 0.6]
colors = comp.nmfc_colorize(verts)
print("NMFC colour range:", colors.min(0).round(3), colors.max(0).round(3))
