"""Plain SGD and Adam over parameter containers or bare arrays."""

from dataclasses import dataclass

import numpy as np

from coadapt.exceptions import NumericError, ShapeError

__all__ = ["AdamState", "sgd_step", "adam_step", "adam_init"]


def _leaves(obj):
    if hasattr(obj, "arrays"):
        return obj.arrays()
    return [np.asarray(obj, dtype=np.float64)]


def _rebuild(template, leaves):
    if hasattr(template, "with_arrays"):
        return template.with_arrays(leaves)
    out = leaves[0]
    return float(out) if np.ndim(template) == 0 and not isinstance(template, np.ndarray) else out


def _checked(params, grads, lr):
    if not lr >= 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    p = _leaves(params)
    g = _leaves(grads)
    if len(p) != len(g) or any(a.shape != b.shape for a, b in zip(p, g)):
        raise ShapeError("gradients are not shape-congruent with parameters")
    if not all(np.all(np.isfinite(b)) for b in g):
        raise NumericError("non-finite gradient entries")
    return p, g


def sgd_step(params, grads, lr):
    """Return ``params - lr * grads``."""
    p, g = _checked(params, grads, lr)
    return _rebuild(params, [a - lr * b for a, b in zip(p, g)])


@dataclass(frozen=True, eq=False)
class AdamState:
    """First and second moment estimates plus the step counter."""

    m: tuple
    v: tuple
    t: int = 0


def adam_init(params):
    leaves = _leaves(params)
    return AdamState(tuple(np.zeros_like(a) for a in leaves), tuple(np.zeros_like(a) for a in leaves), 0)


def adam_step(params, grads, state=None, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(new_params, new_state)``."""
    p, g = _checked(params, grads, lr)
    if state is None:
        state = adam_init(params)
    t = state.t + 1
    new_m, new_v, new_p = [], [], []
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for a, b, m, v in zip(p, g, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * b
        v = beta2 * v + (1.0 - beta2) * (b * b)
        new_p.append(a - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return _rebuild(params, new_p), AdamState(tuple(new_m), tuple(new_v), t)
