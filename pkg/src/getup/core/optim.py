import numpy as np


def poly_lr(base_lr, step, total_steps, power=0.9):
    """Polynomial decay ``base_lr * (1 - step/total)^power``; zero at the end."""
    frac = min(max(step / float(total_steps), 0.0), 1.0)
    return base_lr * (1.0 - frac) ** power


class Adam:
    def __init__(self, store, betas=(0.9, 0.999), eps=1e-8):
        self.store = store
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in store}
        self.v = {k: np.zeros_like(p.data) for k, p in store}

    def step(self, lr, scale=1.0):
        """One update using the store's gradient slots multiplied by ``scale``."""
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.store:
            g = p.grad * scale
            m = self.m[k]
            v = self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
