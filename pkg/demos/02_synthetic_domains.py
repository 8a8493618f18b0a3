"""The synthetic emotion domains and their oracle.

Every clip is ``eps_t = A_y c_t + b_y + noise`` for a shared sinusoidal
content signal ``c_t``.  The oracle inverts each domain map and keeps the
label whose content fits the known frequencies best.
"""

import numpy as np

from exprgan import dataio, objectives as obj
from exprgan.networks import EMOTIONS

spec = dataio.make_domain_spec(seed=0)
print("jaw gains per domain:", np.round(spec.maps[:, 0, 0], 3))

tracks, labels = dataio.synthesize_clips(spec, clips_per_domain=3, length=100, seed=7)
guesses = [dataio.oracle_classify(t, spec) for t in tracks]
print("oracle accuracy on fresh clips:", np.mean(np.array(guesses) == labels))

res = dataio.oracle_residuals(tracks[0], spec)
print("residuals for a", EMOTIONS[labels[0]], "clip:", np.round(res, 1))

# one content signal rendered in every domain keeps its speech channel
content = dataio.content_signal(spec, 100, np.random.default_rng(3))
rng = np.random.default_rng(4)
jaws = np.array([dataio.render_clip(spec, content, y, rng)[:, 0] for y in range(7)])
r = [float(obj.pcc(jaws[0], jaws[y]).data[0, 0]) for y in range(1, 7)]
print("jaw PCC of domain 0 against the others:", np.round(r, 4))
