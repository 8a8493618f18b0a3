"""Train the manipulator on synthetic domains, then translate a held-out clip.

Usage: ``python demos/03_train_and_translate.py [iterations] [out_dir]``.
The default 5,000 iterations take several minutes on one core; a few
hundred are enough to watch the losses move.
"""

import logging
import sys
from pathlib import Path

import numpy as np

from exprgan import dataio, inference, metrics, trainer
from exprgan.networks import EMOTIONS

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
out_dir = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out/train")
logging.basicConfig(level=logging.INFO, format="%(message)s")

spec = dataio.make_domain_spec(seed=0)
tracks, labels = dataio.synthesize_clips(spec, clips_per_domain=40, length=100, seed=0)
mean, std = dataio.norm_stats(tracks)
config = trainer.TrainConfig(iterations=iterations, checkpoint_every=0)
data = trainer.TrainingData(tracks, labels, config.n_window, mean, std)
trainer.train(config, data, out_dir)

model = inference.Manipulator.load(out_dir / "model.nedm")
held_out, held_labels = dataio.synthesize_clips(spec, 1, 100, seed=0, first_clip=100_000)
clip = held_out[0]
print(f"source clip is {EMOTIONS[held_labels[0]]}")

rng = np.random.default_rng(0)
for target, name in enumerate(EMOTIONS):
    style = model.map_latent(rng.standard_normal(4), target)
    out = inference.translate_track(model, clip, style)
    guess = EMOTIONS[dataio.oracle_classify(out, spec)]
    print(f"  toward {name:9s} oracle says {guess:9s} jaw PCC {metrics.track_jaw_pcc(clip, out):.3f}")

# a reference clip works too: its windows' styles are pooled by the geometric median
ref = held_out[5]
out = inference.translate_track(model, clip, inference.extract_style(model, ref))
print(f"by reference ({EMOTIONS[held_labels[5]]}): oracle says "
      f"{EMOTIONS[dataio.oracle_classify(out, spec)]}")
