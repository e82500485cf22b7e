import numpy as np

from .layers import to_f32_grid


class Adam:
    """Adam over a dict of named parameter arrays, updated in place.

    Parameters are snapped back onto the float32 grid after each step.
    """

    def __init__(self, params, lr=8e-6, beta1=0.9, beta2=0.999, eps=1e-7):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for name, p in self.params.items():
            g = grads.get(name)
            if g is None:
                continue
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            p[...] = to_f32_grid(p - scale * self.m[name] / (np.sqrt(self.v[name]) + self.eps))
