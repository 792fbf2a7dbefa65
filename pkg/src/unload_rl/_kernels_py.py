"""Pure NumPy implementations of the fused kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def adam_step(params, grads, m, v, lr, beta1, beta2, eps, bias1, bias2):
    n = params.shape[0]
    if grads.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_step: length mismatch")
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * (grads * grads)
    step = lr * (m / bias1)
    step /= np.sqrt(v / bias2) + eps
    params -= step


def polyak(target, online, zeta):
    if online.shape[0] != target.shape[0]:
        raise ValueError("polyak: length mismatch")
    target *= 1.0 - zeta
    target += zeta * online
