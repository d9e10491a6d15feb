"""Spherical Bessel and Hankel functions and Legendre polynomials.

Values are kept internally as (log-modulus, sign) pairs so that orders far
beyond the argument do not under- or overflow: ``j_n(1e-3)`` for ``n = 100``
is around ``1e-490`` and ``y_n`` is its reciprocal in size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_BIG = 1e200
_LOG_BIG = math.log(_BIG)


@dataclass(frozen=True)
class SphericalBesselTable:
    """Orders ``0..order_max`` of ``j_n``, ``y_n`` and their derivatives at ``x``."""

    order_max: int
    argument: float
    log_abs_j: np.ndarray
    sign_j: np.ndarray
    log_abs_y: np.ndarray
    sign_y: np.ndarray
    dlog_j: np.ndarray  # j_n' / j_n
    dlog_y: np.ndarray  # y_n' / y_n

    @property
    def values_j(self) -> np.ndarray:
        return self.sign_j * np.exp(self.log_abs_j)

    @property
    def values_y(self) -> np.ndarray:
        return self.sign_y * np.exp(self.log_abs_y)

    @property
    def values_h(self) -> np.ndarray:
        return self.values_j + 1j * self.values_y

    @property
    def derivatives_j(self) -> np.ndarray:
        return self.values_j * self.dlog_j

    @property
    def derivatives_y(self) -> np.ndarray:
        return self.values_y * self.dlog_y

    @property
    def derivatives_h(self) -> np.ndarray:
        return self.derivatives_j + 1j * self.derivatives_y

    def wronskian_residual(self) -> np.ndarray:
        """Relative residual of ``x^2 (j_n y_n' - j_n' y_n) = 1`` per order.

        Evaluated as ``x^2 j_n y_n (y_n'/y_n - j_n'/j_n)`` in log form.
        """
        x = self.argument
        prod = self.sign_j * self.sign_y * np.exp(self.log_abs_j + self.log_abs_y + 2 * math.log(x))
        w = prod * (self.dlog_y - self.dlog_j)
        return np.abs(w - 1.0)


def _miller_log(n_max: int, x: float):
    """``(log|j_n|, sign j_n)`` for ``n = 0..n_max`` by downward recurrence."""
    # the margin is counted from max(n_max, x): below x the recurrence is oscillatory
    start = max(n_max, math.ceil(x)) + max(20, math.ceil(1.5 * x))
    logs = np.empty(n_max + 1)
    signs = np.empty(n_max + 1)
    f_next, f = 0.0, 1e-30
    shift = 0.0
    for n in range(start, -1, -1):
        if n <= n_max:
            logs[n] = (math.log(abs(f)) if f != 0.0 else -math.inf) + shift
            signs[n] = math.copysign(1.0, f)
        if n == 0:
            break
        f_prev = (2 * n + 1) / x * f - f_next
        f_next, f = f, f_prev
        if abs(f) > _BIG:
            f /= _BIG
            f_next /= _BIG
            shift += _LOG_BIG
    # normalise on the larger of the closed forms j0, j1
    j0 = math.sin(x) / x
    j1 = math.sin(x) / x ** 2 - math.cos(x) / x
    if abs(j0) >= abs(j1) or n_max == 0:
        ref, idx = j0, 0
    else:
        ref, idx = j1, 1
    logs = logs - logs[idx] + math.log(abs(ref))
    signs = signs * signs[idx] * math.copysign(1.0, ref)
    return logs, signs


def _upward_y_log(n_max: int, x: float):
    logs = np.empty(n_max + 1)
    signs = np.empty(n_max + 1)
    y_prev = -math.cos(x) / x
    y = -math.cos(x) / x ** 2 - math.sin(x) / x
    shift = 0.0
    logs[0], signs[0] = math.log(abs(y_prev)) if y_prev else -math.inf, math.copysign(1.0, y_prev)
    if n_max >= 1:
        logs[1], signs[1] = math.log(abs(y)) if y else -math.inf, math.copysign(1.0, y)
    for n in range(1, n_max):
        y_new = (2 * n + 1) / x * y - y_prev
        y_prev, y = y, y_new
        if abs(y) > _BIG:
            y /= _BIG
            y_prev /= _BIG
            shift += _LOG_BIG
        logs[n + 1] = math.log(abs(y)) + shift
        signs[n + 1] = math.copysign(1.0, y)
    return logs, signs


def _dlog(logs, signs, x, log_next, sign_next):
    """``f_n'/f_n`` from ratios ``f_{n-1}/f_n`` (``n >= 1``) and ``-f_1/f_0``."""
    n = np.arange(len(logs))
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.empty(len(logs))
        all_logs = np.append(logs, log_next)
        all_signs = np.append(signs, sign_next)
        out[0] = -all_signs[1] * all_signs[0] * math.exp(all_logs[1] - all_logs[0])
        ratio = signs[:-1] * signs[1:] * np.exp(logs[:-1] - logs[1:])
        out[1:] = ratio - (n[1:] + 1) / x
    return out


def spherical_bessel_table(order_max: int, x: float) -> SphericalBesselTable:
    if order_max < 0:
        raise ValueError("order must be non-negative")
    x = float(x)
    if x <= 0:
        raise ValueError("table requires x > 0")
    lj, sj = _miller_log(order_max + 1, x)
    ly, sy = _upward_y_log(order_max + 1, x)
    dj = _dlog(lj[:-1], sj[:-1], x, lj[-1], sj[-1])
    dy = _dlog(ly[:-1], sy[:-1], x, ly[-1], sy[-1])
    return SphericalBesselTable(order_max, x, lj[:-1], sj[:-1], ly[:-1], sy[:-1], dj, dy)


def _bessel_j_all(n_max: int, x: float) -> np.ndarray:
    if x == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    if x < 0:
        # j_n(-x) = (-1)^n j_n(x)
        return _bessel_j_all(n_max, -x) * (-1.0) ** np.arange(n_max + 1)
    logs, signs = _miller_log(n_max, x)
    return signs * np.exp(logs)


def spherical_bessel_j(n: int, x):
    """Spherical Bessel function of the first kind ``j_n(x)``."""
    if n < 0:
        raise ValueError("order must be non-negative")
    xs = np.asarray(x, dtype=float)
    out = np.array([_bessel_j_all(n, float(v))[n] for v in xs.ravel()]).reshape(xs.shape)
    return out[()] if out.ndim == 0 else out


def spherical_bessel_y(n: int, x):
    if n < 0:
        raise ValueError("order must be non-negative")
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("y_n is singular for x <= 0")
    vals = []
    for v in xs.ravel():
        logs, signs = _upward_y_log(n, float(v))
        vals.append(signs[n] * math.exp(logs[n]))
    out = np.array(vals).reshape(xs.shape)
    return out[()] if out.ndim == 0 else out


def spherical_hankel_h1(n: int, x):
    """``h_n^(1)(x) = j_n(x) + i y_n(x)`` for ``x > 0``."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("h_n^(1) is singular for x <= 0")
    return spherical_bessel_j(n, xs) + 1j * spherical_bessel_y(n, xs)


def legendre_all(n_max: int, t) -> np.ndarray:
    """``P_0..P_{n_max}`` at ``t``; result has shape ``(n_max + 1,) + t.shape``."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-12):
        raise ValueError("Legendre argument must lie in [-1, 1]")
    t = np.clip(t, -1.0, 1.0)
    out = np.empty((n_max + 1,) + t.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = t
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1) * t * out[n] - n * out[n - 1]) / (n + 1)
    return out


def legendre_p(n: int, t):
    """Legendre polynomial ``P_n(t)`` by three-term recurrence."""
    if n < 0:
        raise ValueError("order must be non-negative")
    out = legendre_all(n, t)[n]
    return out[()] if np.ndim(out) == 0 else out
