"""Adam with bias correction, and global-norm gradient clipping."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_step(params, grads, state, lr=0.001):
    """Apply one Adam update in place; returns ``(params, state)``.

    ``params`` maps names to tensors and ``grads`` maps the same names to
    arrays. Parameters without a gradient entry are treated as having a zero
    gradient.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.shape:
            raise ValueError(f"adam_step: gradient shape {g.shape} != parameter {name} {p.shape}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.data = (p.data - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(p.dtype, copy=False)
    return params, state


def clip_grad_norm(grads, max_norm):
    """Rescale ``grads`` (in place) so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))
    if max_norm is not None and total > max_norm > 0:
        scale = max_norm / (total + 1e-6)
        for name in grads:
            grads[name] = grads[name] * scale
    return total
