"""Central finite differences, used as the oracle for reverse-mode gradients."""

import numpy as np

from .tensor import Tensor, no_grad


def _scalar(value):
    if isinstance(value, Tensor):
        value = value.data
    return float(np.asarray(value, dtype=np.float64).reshape(()))


def finite_difference(f, params, eps=1e-3, max_coords=None, rng=None):
    """Gradient of ``f(params)`` by central differences in float64.

    ``params`` maps names to tensors; their data is converted to float64 in
    place before probing. When ``max_coords`` is set, at most that many
    coordinates per tensor are probed (chosen with ``rng``) and the rest of the
    returned gradient is NaN.
    """
    for p in params.values():
        p.data = np.ascontiguousarray(p.data, dtype=np.float64)
    grads = {}
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                rng = rng if rng is not None else np.random.default_rng(0)
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
                g = np.full(flat.size, np.nan)
            else:
                g = np.zeros(flat.size)
            for k in coords:
                orig = flat[k]
                flat[k] = orig + eps
                up = _scalar(f(params))
                flat[k] = orig - eps
                down = _scalar(f(params))
                flat[k] = orig
                g[k] = (up - down) / (2.0 * eps)
            grads[name] = g.reshape(p.shape)
    return grads


def relative_error(analytic, numeric):
    """``|a - n| / max(|a|, |n|)`` over the probed (non-NaN) entries, as vectors."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    probed = ~np.isnan(n)
    a, n = a[probed], n[probed]
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def max_relative_error(analytic, numeric):
    """Largest :func:`relative_error` across a dict of named gradients."""
    worst = 0.0
    for name, num in numeric.items():
        ana = analytic.get(name)
        if ana is None:
            ana = np.zeros_like(num)
        worst = max(worst, relative_error(ana, num))
    return worst
