"""Checking the tape against finite differences.

Builds a small LSTM-plus-affine model, records one forward pass on a tape,
runs backward, and compares every gradient entry with a central difference.
"""

import numpy as np

from exprgan import autodiff as ad
from exprgan import networks as nets
from exprgan.autodiff import Tape

# float64 so the finite differences themselves are trustworthy
cfg = nets.NetConfig(hidden_g=4, hidden_e=3, hidden_d=3, mapping_hidden=4)
store = nets.init_params(cfg, seed=0, dtype=np.float64)
seq = np.random.default_rng(1).uniform(-1, 1, size=(2, 5, 51))


def loss(tape):
    P = nets.Bound(tape, store, trainable=nets.DISCRIMINATOR_GROUPS)
    scores = nets.discriminate(P, seq)
    return ad.mean_all(ad.square(scores - 1.0))


tape = Tape(np.float64)
out = loss(tape)
print(f"loss {float(out):.6f}, {len(tape)} nodes on the tape")
tape.backward(out)

worst = worst_abs = 0.0
h = 1e-3
checked = 0
for name in store.names(nets.DISCRIMINATOR_GROUPS):
    flat = store[name].value.reshape(-1)
    grad = store[name].grad.reshape(-1)
    for i in range(0, flat.size, max(1, flat.size // 8)):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(loss(Tape(np.float64)))
        flat[i] = orig - h
        fm = float(loss(Tape(np.float64)))
        flat[i] = orig
        num = (fp - fm) / (2 * h)
        checked += 1
        worst_abs = max(worst_abs, abs(num - grad[i]))
        if abs(num - grad[i]) > 1e-6:
            worst = max(worst, abs(num - grad[i]) / max(abs(num), abs(grad[i])))
print(f"{checked} entries checked: max abs error {worst_abs:.1e}, max rel error {worst:.1e}")

# Adam with beta1 = 0 moves a fresh parameter by ~lr on its first step
s = ad.ParameterStore(dtype=np.float64)
s.add("w", [0.0])
s["w"].grad = np.array([3.0])
ad.adam_step(s, lr=0.1)
print("after one Adam step:", s.value("w"))
