"""Pure-numpy RK4 stepping kernel (fallback for the compiled ``_rk4`` module)."""
import numpy as np


def rk4_linear(left, right, y0, h):
    """Integrate ``y' = L(t) y + y R(t)`` with classical RK4.

    ``left`` and ``right`` hold generator samples on the half-step grid
    ``t_0, t_0 + h/2, ..., t_0 + N h`` (shape ``(2N+1, d, d)``); either may
    be ``None``. Returns the ``N + 1`` iterates, starting with ``y0``.
    """
    samples = left if left is not None else right
    n = (samples.shape[0] - 1) // 2
    y = np.array(y0, dtype=complex)
    out = np.empty((n + 1,) + y.shape, dtype=complex)
    out[0] = y

    def f(j, v):
        r = left[j] @ v if left is not None else 0.0
        if right is not None:
            r = r + v @ right[j]
        return r

    half = 0.5 * h
    sixth = h / 6.0
    for k in range(n):
        a = 2 * k
        k1 = f(a, y)
        k2 = f(a + 1, y + half * k1)
        k3 = f(a + 1, y + half * k2)
        k4 = f(a + 2, y + h * k3)
        y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out
