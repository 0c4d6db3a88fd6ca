"""Explicit adaptive Runge–Kutta integration (Dormand–Prince 5(4) pair).

The pair propagates the 5th-order solution and uses the embedded 4th-order solution
for the local error estimate. The last stage is evaluated at the new point and
reused as the first stage of the next step (FSAL).
"""

import logging
from typing import Callable, Optional, Tuple

import numpy as np

from cqed_sim.exceptions import StiffnessError

logger = logging.getLogger(__name__)

RhsFunction = Callable[[float, np.ndarray], np.ndarray]

# Butcher table
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])

# B minus the embedded 4th-order weights
E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ERROR_EXPONENT = -1.0 / 5.0


def error_norm(err: np.ndarray, y: np.ndarray, y_new: np.ndarray, rtol: float, atol: float) -> float:
    """RMS of the error scaled by atol + rtol·max(|y|, |y_new|)."""
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def dp54_step(
    fun: RhsFunction, t: float, y: np.ndarray, h: float, k1: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Take one Dormand–Prince step.

    Returns:
        (y_new, error_estimate, f(t + h, y_new))
    """
    k = np.empty((7, y.size), dtype=y.dtype)
    k[0] = k1
    for i in range(1, 7):
        dy = np.dot(np.asarray(A[i]), k[:i]) * h
        k[i] = fun(t + C[i] * h, y + dy)
    y_new = y + h * np.dot(B[:6], k[:6])
    err = h * np.dot(E, k)
    return y_new, err, k[6]


def initial_step(
    fun: RhsFunction, t0: float, y0: np.ndarray, f0: np.ndarray, rtol: float, atol: float, span: float
) -> float:
    """Starting step from the size of the state and of its derivative."""
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6 * span
    else:
        h0 = 0.01 * d0 / d1
    return min(h0, span)


def integrate_adaptive(
    fun: RhsFunction,
    t0: float,
    y0: np.ndarray,
    t_end: float,
    rtol: float,
    atol: float,
    max_step: float = np.inf,
    first_step: Optional[float] = None,
    is_admissible: Optional[Callable[[np.ndarray], bool]] = None,
    on_step: Optional[Callable[[float, np.ndarray], bool]] = None,
    max_steps: int = 10_000_000,
) -> Tuple[float, np.ndarray, int, float]:
    """Integrate y' = fun(t, y) from t0 to t_end with error control.

    Args:
        fun: Right-hand side
        t0: Start time
        y0: Real initial state
        t_end: Final time (> t0)
        rtol: Relative tolerance
        atol: Absolute tolerance
        max_step: Largest allowed step
        first_step: Initial step; estimated when None
        is_admissible: Extra acceptance test on the proposed state; a False
            result rejects the step and halves it
        on_step: Called after every accepted step; returning True stops early
        max_steps: Hard cap on accepted steps

    Returns:
        (t_final, y_final, accepted_steps, next_step)

    Raises:
        StiffnessError: If the step size underflows
    """
    span = t_end - t0
    t = float(t0)
    y = np.array(y0, dtype=float)
    f = fun(t, y)
    h = first_step if first_step is not None else initial_step(fun, t, y, f, rtol, atol, span)
    h = min(h, max_step)
    steps = 0

    proposed = h
    while t < t_end and steps < max_steps:
        h = min(proposed, t_end - t)
        min_step = 10.0 * np.finfo(float).eps * max(abs(t), span)
        if h < min_step:
            raise StiffnessError(
                "Step size underflow",
                diagnostics={
                    "t": t,
                    "h": h,
                    "state_norm": float(np.linalg.norm(y)),
                    "steps": steps,
                },
            )

        y_new, err, f_new = dp54_step(fun, t, y, h, f)
        err_n = error_norm(err, y, y_new, rtol, atol)

        if not np.isfinite(err_n) or err_n > 1.0:
            factor = MIN_FACTOR if not np.isfinite(err_n) else max(
                MIN_FACTOR, SAFETY * err_n**ERROR_EXPONENT
            )
            proposed = h * factor
            continue

        if is_admissible is not None and not is_admissible(y_new):
            proposed = h * 0.5
            continue

        t += h
        y = y_new
        f = f_new
        steps += 1
        if t_end - t <= min_step:
            t = t_end

        factor = MAX_FACTOR if err_n == 0 else min(MAX_FACTOR, SAFETY * err_n**ERROR_EXPONENT)
        if h == proposed:
            proposed = min(h * factor, max_step)

        if on_step is not None and on_step(t, y):
            break

    logger.debug(
        f"Integration finished at t={t:.6g} s after {steps} steps",
        extra={"t": t, "steps": steps},
    )
    return t, y, steps, proposed
