"""Dormand-Prince 5(4) integrator with PI step-size control.

Written in-house (rather than scipy's solve_ivp) so that a projection hook
can run after every accepted step.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B_HAT = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_HAT

# PI controller gains (Hairer & Wanner, order 5)
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class StepSizeUnderflow(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"step size underflow at t={t:.6g}")
        self.t = t


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_grid,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    h0: float | None = None,
    max_steps: int = 10_000_000,
) -> tuple[np.ndarray, dict]:
    """Integrate y' = rhs(t, y) and return the states at every time of ``t_grid``.

    The grid must be increasing and start at the initial time. Steps are
    clipped to land exactly on grid points.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    y = np.array(y0, dtype=float)
    out = np.empty((len(t_grid),) + y.shape)
    out[0] = y
    t = t_grid[0]
    k1 = rhs(t, y)
    if h0 is None:
        scale = atol + rtol * np.abs(y)
        d0 = np.sqrt(np.mean((y / scale) ** 2))
        d1 = np.sqrt(np.mean((k1 / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h0, t_grid[-1] - t) if len(t_grid) > 1 else h0
    err_prev = 1e-4
    stats = {"accepted": 0, "rejected": 0, "nfev": 1}

    for i, t_next in enumerate(t_grid[1:], start=1):
        while t < t_next:
            if stats["accepted"] + stats["rejected"] > max_steps:
                raise StepSizeUnderflow(t)
            last = h >= t_next - t
            step = t_next - t if last else h
            if step <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
                raise StepSizeUnderflow(t)
            ks = [k1]
            for j in range(1, 7):
                yj = y + step * sum(a * kk for a, kk in zip(_A[j], ks))
                ks.append(rhs(t + _C[j] * step, yj))
            stats["nfev"] += 6
            y_new = yj  # row 7 of the tableau equals the 5th-order solution (FSAL)
            err_vec = step * sum(e * kk for e, kk in zip(_E, ks))
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not np.isfinite(err):
                h = step * _MIN_FACTOR
                stats["rejected"] += 1
                continue
            if err <= 1.0:
                t = t_next if last else t + step
                if project is not None:
                    y_new = project(y_new)
                    k1 = rhs(t, y_new)
                    stats["nfev"] += 1
                else:
                    k1 = ks[6]
                y = y_new
                stats["accepted"] += 1
                factor = _SAFETY * max(err, 1e-10) ** -_ALPHA * err_prev**_BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                if not last or h <= step:
                    h = step * factor
                err_prev = max(err, 1e-4)
            else:
                stats["rejected"] += 1
                h = step * max(_MIN_FACTOR, _SAFETY * err**-_ALPHA)
        out[i] = y
    return out, stats
