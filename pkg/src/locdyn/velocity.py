"""Velocity-times-sampling-period estimates from past position estimates.

All filters return the displacement ``v * dt`` (same units as positions).
``taylor6`` and ``smooth_fir`` are causal: at step ``k`` they read samples
``k-1 .. k-7`` and estimate the derivative at the window midpoint ``k-4``.
"""

from __future__ import annotations

from collections import deque
from typing import Callable

import numpy as np

from .errors import InsufficientHistory, InvalidParams

# antisymmetric tap weights on (x(k-s) - x(k-8+s)) for s = 3, 2, 1
TAYLOR6_TAPS = (45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0)
SMOOTH_FIR_TAPS = (5.0 / 32.0, 4.0 / 32.0, 1.0 / 32.0)
LAG = 7


class PositionHistory:
    """Ring buffer of the most recent per-step estimates, keyed by step index."""

    def __init__(self, maxlen: int = 8):
        if maxlen < 8:
            raise InvalidParams("history must hold at least 8 samples")
        self._steps: deque[int] = deque(maxlen=maxlen)
        self._values: deque[np.ndarray] = deque(maxlen=maxlen)

    def append(self, step: int, value) -> None:
        value = np.asarray(value, dtype=float)
        if not np.all(np.isfinite(value)):
            raise InvalidParams("history entries must be finite")
        if self._steps and step != self._steps[-1] + 1:
            raise InvalidParams(f"history steps must be contiguous; got {step} after {self._steps[-1]}")
        self._steps.append(step)
        self._values.append(value.copy())

    @classmethod
    def from_sequence(cls, values, start: int = 0, maxlen: int | None = None) -> PositionHistory:
        values = list(values)
        h = cls(maxlen=max(8, maxlen or len(values)))
        for i, v in enumerate(values):
            h.append(start + i, v)
        return h

    def __len__(self) -> int:
        return len(self._steps)

    def has(self, step: int) -> bool:
        return bool(self._steps) and self._steps[0] <= step <= self._steps[-1]

    def __getitem__(self, step: int) -> np.ndarray:
        if not self.has(step):
            raise InsufficientHistory(f"step {step} not in history")
        return self._values[step - self._steps[0]]

    @property
    def last_step(self) -> int | None:
        return self._steps[-1] if self._steps else None


def _require(history: PositionHistory, steps) -> None:
    missing = [s for s in steps if not history.has(s)]
    if missing:
        raise InsufficientHistory(f"missing samples for steps {missing}")


def central_diff(history: PositionHistory, k: int) -> np.ndarray:
    """Noncausal ``(x(k+1) - x(k-1)) / 2``."""
    _require(history, (k - 1, k + 1))
    return (history[k + 1] - history[k - 1]) / 2.0


def _lagged(history: PositionHistory, k: int, taps) -> np.ndarray:
    _require(history, range(k - LAG, k))
    c3, c2, c1 = taps
    return (
        c3 * (history[k - 3] - history[k - 5])
        + c2 * (history[k - 2] - history[k - 6])
        + c1 * (history[k - 1] - history[k - 7])
    )


def taylor6(history: PositionHistory, k: int) -> np.ndarray:
    """Causal sixth-order difference over samples ``k-1 .. k-7``."""
    return _lagged(history, k, TAYLOR6_TAPS)


def smooth_fir(history: PositionHistory, k: int) -> np.ndarray:
    """Smooth low-noise differentiator (quadratic fit, 7-sample lag)."""
    return _lagged(history, k, SMOOTH_FIR_TAPS)


def _central_causal(history: PositionHistory, k: int) -> np.ndarray:
    # the newest sample with both neighbours available is k-2
    return central_diff(history, k - 2)


METHODS: dict[str, Callable[[PositionHistory, int], np.ndarray]] = {
    "central": _central_causal,
    "taylor6": taylor6,
    "smooth_fir": smooth_fir,
}


def estimate_velocity(
    history: PositionHistory,
    k: int,
    method: str = "smooth_fir",
    fallback: str = "zero",
    external=None,
    shape=None,
) -> np.ndarray:
    """Displacement ``v(k-1) * dt`` used to predict step ``k``.

    ``method="external"`` passes ``external`` (already multiplied by dt)
    through.  When the history is too short the fallback applies; the only
    fallback is ``"zero"``, i.e. predict the previous estimate.
    """
    if method == "external":
        if external is None:
            raise InvalidParams("method 'external' needs a supplied displacement")
        return np.array(external, dtype=float)
    if fallback != "zero":
        raise InvalidParams(f"unknown fallback {fallback!r}")
    try:
        fn = METHODS[method]
    except KeyError:
        raise InvalidParams(f"unknown velocity method {method!r}") from None
    try:
        return fn(history, k)
    except InsufficientHistory:
        if shape is None:
            if not len(history):
                raise
            shape = history[history.last_step].shape
        return np.zeros(shape)


def filter_series(x: np.ndarray, taps) -> np.ndarray:
    """Apply a lagged differentiator along axis 0 of ``x``; row ``t`` uses ``x[t .. t+6]``."""
    x = np.asarray(x, dtype=float)
    c3, c2, c1 = taps
    T = x.shape[0] - LAG + 1
    if T <= 0:
        raise InsufficientHistory("series shorter than the filter window")
    # x(k-1) .. x(k-7) -> x[t+6] .. x[t]
    return (
        c3 * (x[4:4 + T] - x[2:2 + T])
        + c2 * (x[5:5 + T] - x[1:1 + T])
        + c1 * (x[6:6 + T] - x[0:T])
    )
