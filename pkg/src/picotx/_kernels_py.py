"""Fallback implementations of the compiled kernels (scipy + plain Python)."""
import numpy as np
from scipy.signal import lfilter


def one_pole(x, alpha, y0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy(), float(y0)
    y, _ = lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * y0])
    return y, float(y[-1])


def dc_block(x, r, x_prev, y_prev):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy(), float(x_prev), float(y_prev)
    y, _ = lfilter([1.0, -1.0], [1.0, -r], x, zi=[-x_prev + r * y_prev])
    return y, float(x[-1]), float(y[-1])


def agc(x, attack, release, target, floor, level0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(x)
    level = float(level0)
    for i, v in enumerate(x.tolist()):
        mag = abs(v)
        level += (attack if mag > level else release) * (mag - level)
        out[i] = v * target / (level if level > floor else floor)
    return out, level
