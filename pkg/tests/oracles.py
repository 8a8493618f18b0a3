"""Independent reference computations used to check the library."""

import numpy as np

from exprgan import autodiff as ad


def central_differences(f, store, names, h=1e-3, coords=None):
    """Numerical gradient of ``f(store) -> float`` w.r.t. the named entries.

    ``coords`` optionally maps a name to the flat indices to probe.
    """
    out = {}
    for name in names:
        value = store[name].value
        flat = value.reshape(-1)
        idx = range(flat.size) if coords is None else coords[name]
        g = {}
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = f(store)
            flat[i] = orig - h
            fm = f(store)
            flat[i] = orig
            g[i] = (fp - fm) / (2 * h)
        out[name] = g
    return out


def max_rel_error(analytic, numeric, floor=1e-6):
    """Largest relative error; entries whose absolute error is below ``floor`` count as exact."""
    worst = 0.0
    for name, g in numeric.items():
        a_flat = analytic[name].reshape(-1)
        for i, n in g.items():
            a = a_flat[i]
            err = abs(a - n)
            if err < floor:
                continue
            worst = max(worst, err / max(abs(a), abs(n)))
    return worst


def brute_force_geometric_median(points, step=1e-3):
    """Grid search of sum-of-distances, coarse-to-fine down to ``step``."""
    pts = np.asarray(points, dtype=np.float64)

    def obj(grid):
        return np.linalg.norm(grid[:, None, :] - pts[None], axis=2).sum(axis=1)

    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = (lo + hi) / 2
    half = max((hi - lo).max() / 2, 1e-9)
    spacing = half / 50
    while True:
        axis = np.arange(-50, 51) * spacing
        gx, gy = np.meshgrid(center[0] + axis, center[1] + axis, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
        center = grid[np.argmin(obj(grid))]
        if spacing <= step:
            return center
        spacing = max(spacing / 10, step)


def _blur2d(img):
    k1 = np.array([1, 4, 6, 4, 1], dtype=np.float64) / 16
    k = np.outer(k1, k1)
    pad = [(2, 2), (2, 2)] + [(0, 0)] * (img.ndim - 2)
    p = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img, dtype=np.float64)
    H, W = img.shape[:2]
    for dy in range(5):
        for dx in range(5):
            out += k[dy, dx] * p[dy:dy + H, dx:dx + W]
    return out


def _expand(img, shape):
    """Each fine pixel is the kernel-weighted mean of the coarse pixels within reach."""
    k1 = {-2: 1.0, -1: 4.0, 0: 6.0, 1: 4.0, 2: 1.0}
    h, w = img.shape[:2]
    out = np.zeros(tuple(shape[:2]) + img.shape[2:])
    for y in range(shape[0]):
        for x in range(shape[1]):
            acc, wsum = 0.0, 0.0
            for i in range(max(0, (y - 1) // 2), min(h, y // 2 + 2)):
                for j in range(max(0, (x - 1) // 2), min(w, x // 2 + 2)):
                    dy, dx = y - 2 * i, x - 2 * j
                    if abs(dy) <= 2 and abs(dx) <= 2:
                        wt = k1[dy] * k1[dx]
                        acc = acc + wt * img[i, j]
                        wsum += wt
            out[y, x] = acc / wsum
    return out


def reference_blend(fg, bg, mask, levels):
    """Straightforward pyramid blend written without the library's helpers."""
    def down(img):
        return _blur2d(img)[::2, ::2]

    def up(img, shape):
        return _expand(img, shape)

    def gauss(img):
        g = [img]
        for _ in range(levels - 1):
            g.append(down(g[-1]))
        return g

    def lap(img):
        g = gauss(img)
        return [g[i] - up(g[i + 1], g[i].shape) for i in range(levels - 1)] + [g[-1]]

    lf, lb, gm = lap(fg), lap(bg), gauss(mask)
    out_pyr = [m[..., None] * a + (1 - m[..., None]) * b for m, a, b in zip(gm, lf, lb)]
    img = out_pyr[-1]
    for lvl in reversed(out_pyr[:-1]):
        img = lvl + up(img, lvl.shape)
    return np.clip(img, 0, 1)


def random_network_loss(rng, dtype=np.float64):
    """A random small instance mixing every supported op, as ``(store, f(tape, store) -> Tensor)``."""
    store = ad.ParameterStore(dtype=dtype)
    n_in, hidden, n_out, batch = (int(v) for v in rng.integers(2, 5, size=4))
    store.add("W1", rng.uniform(-1, 1, (n_in, hidden)))
    store.add("b1", rng.uniform(-1, 1, (hidden,)))
    store.add("W2", rng.uniform(-1, 1, (hidden + n_in, n_out)))
    store.add("b2", rng.uniform(-1, 1, (n_out,)))
    store.add("s", rng.uniform(0.5, 1.5, (1, n_out)))
    x = rng.uniform(-1, 1, (batch, n_in))
    y = rng.uniform(-1, 1, (batch, n_out))
    variant = int(rng.integers(4))

    def loss(tape, st):
        p = {k: tape.param(st, k) for k in st}
        xc = tape.constant(x)
        h = ad.tanh(xc @ p["W1"] + p["b1"])
        z = ad.concat([h, ad.sigmoid(xc)]) @ p["W2"] + p["b2"]
        z = z * p["s"]
        if variant == 0:
            return ad.mean_all(ad.square(z - tape.constant(y)))
        if variant == 1:
            return ad.sum_all(ad.abs_(ad.slice_last(z, 0, 1) - 20.0) + ad.abs_(z * z + 0.5)) * 0.5
        if variant == 2:
            return ad.mean_all(ad.sqrt(ad.square(z) + 1.0) / (ad.square(p["s"]) + 1.0))
        return ad.sum_all(ad.tanh(z) * tape.constant(y)) - ad.mean_all(ad.sigmoid(z))

    return store, loss
