"""Fixed-step integration used by the truth propagator and filter prediction."""

from __future__ import annotations

from typing import Callable

import numpy as np


class PropagationError(RuntimeError):
    """Raised when a derivative or propagated state goes non-finite."""


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step of ẋ = f(x) over dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = f(x)
    k2 = f(x + (0.5 * dt) * k1)
    k3 = f(x + (0.5 * dt) * k2)
    k4 = f(x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if not np.all(np.isfinite(out)):
        raise PropagationError("non-finite state after RK4 step")
    return out
