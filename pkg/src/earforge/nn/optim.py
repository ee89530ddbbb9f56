"""Parameter-update rules: Nesterov momentum and Adam.

Optimizers mutate the parameter dict in place and keep their own slot state
keyed by parameter name, so training remains a deterministic function of the
update order (dict insertion order, fixed by network construction).
"""

from __future__ import annotations

import numpy as np


class NesterovMomentum:
    """Momentum with Nesterov lookahead (buf = m*buf + g; step = g + m*buf)."""

    def __init__(self, learning_rate=0.01, momentum=0.9):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity = {}

    def step(self, params, grads):
        m = self.momentum
        for key, p in params.items():
            g = grads[key]
            buf = self._velocity.get(key)
            if buf is None:
                buf = np.zeros_like(p)
                self._velocity[key] = buf
            buf *= m
            buf += g
            p -= (self.learning_rate * (g + m * buf)).astype(p.dtype, copy=False)


class Adam:
    """Adam with bias correction."""

    def __init__(self, learning_rate=1e-4, betas=(0.9, 0.999), eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self._m = {}
        self._v = {}
        self._t = 0

    def step(self, params, grads):
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self._t
        bias2 = 1.0 - b2 ** self._t
        for key, p in params.items():
            g = grads[key].astype(np.float64)
            m = self._m.get(key)
            if m is None:
                m = self._m[key] = np.zeros(p.shape, dtype=np.float64)
            v = self._v.get(key)
            if v is None:
                v = self._v[key] = np.zeros(p.shape, dtype=np.float64)
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            step = self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p -= step.astype(p.dtype, copy=False)
