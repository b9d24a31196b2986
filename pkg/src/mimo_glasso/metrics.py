"""Downlink performance measures in closed form.

All quantities follow from ``H``, ``V`` and the noise variances because the
data symbols are zero-mean, unit-variance and independent; no symbols or
noise samples are drawn here.  Rates are in bits (base-2 logarithm).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DimensionError
from .precoder import PrecoderOutput

__all__ = [
    "NoiseProfile",
    "MetricsReport",
    "sinr",
    "sinr_all",
    "avg_throughput",
    "power_leakage",
    "d_value",
    "rss",
    "evaluate",
]


@dataclass(frozen=True)
class NoiseProfile:
    """Per-user noise variances ``sigma_k^2``."""

    variances: tuple

    def __post_init__(self):
        var = tuple(float(x) for x in np.atleast_1d(self.variances))
        if not var or not all(x > 0 and np.isfinite(x) for x in var):
            raise ValueError("noise variances must be positive and finite")
        object.__setattr__(self, "variances", var)

    @classmethod
    def uniform(cls, k_users: int, variance: float) -> "NoiseProfile":
        return cls((variance,) * k_users)

    def as_array(self, k_users: int) -> np.ndarray:
        if len(self.variances) != k_users:
            raise DimensionError(f"need {k_users} noise variances, have {len(self.variances)}")
        return np.asarray(self.variances)


@dataclass
class MetricsReport:
    per_user_sinr: np.ndarray
    per_user_rate: np.ndarray
    avg_throughput: float
    leakage: float
    rss: float
    d_value: float

    def to_dict(self) -> dict:
        return {
            "per_user_sinr": [float(x) for x in self.per_user_sinr],
            "per_user_rate": [float(x) for x in self.per_user_rate],
            "avg_throughput": self.avg_throughput,
            "leakage": self.leakage,
            "rss": self.rss,
            "d_value": self.d_value,
        }


def _gains(h, out: PrecoderOutput) -> np.ndarray:
    """``G[k, l] = |h_k^T v_l|^2``."""
    h = np.asarray(h)
    v = np.asarray(out.v_matrix)
    if h.shape != v.shape:
        raise DimensionError(f"V shape {v.shape} does not match H shape {h.shape}")
    return np.abs(h.T @ v) ** 2


def _noise(noise, k):
    if isinstance(noise, NoiseProfile):
        return noise.as_array(k)
    arr = np.broadcast_to(np.asarray(noise, dtype=float), (k,))
    if np.any(arr <= 0):
        raise ValueError("noise variances must be positive")
    return arr


def sinr_all(h, out: PrecoderOutput, noise) -> np.ndarray:
    """SINR of every user; zero for users outside the selected set."""
    g = _gains(h, out)
    k = g.shape[0]
    var = _noise(noise, k)
    sel = list(out.selected_set)
    res = np.zeros(k)
    if sel:
        sub = g[np.ix_(sel, sel)]
        signal = np.diag(sub)
        interference = sub.sum(axis=1) - signal
        res[sel] = signal / (var[sel] + interference)
    return res


def sinr(h, out: PrecoderOutput, noise, user: int) -> float:
    """SINR of selected user ``user``; only selected users interfere."""
    if user not in out.selected_set:
        raise ValueError(f"user {user} is not in the selected set {out.selected_set}")
    return float(sinr_all(h, out, noise)[user])


def avg_throughput(h, out: PrecoderOutput, noise, weights=None) -> float:
    """Weighted rate per selected user, ``(1/L) sum_{l in S} w_l log2(1 + SINR_l)``."""
    sel = list(out.selected_set)
    if not sel:
        raise ValueError("selected set is empty")
    k = np.asarray(h).shape[1]
    w = np.ones(k) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (k,):
        raise DimensionError(f"need {k} weights, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    rates = np.log2(1.0 + sinr_all(h, out, noise))
    return float(np.sum(w[sel] * rates[sel]) / len(sel))


def power_leakage(h, out: PrecoderOutput, per_user: bool = True) -> float:
    """Interference power reaching users outside the selected set.

    The double sum ``sum_{k not in S} sum_{l in S} |h_k^T v_l|^2`` is divided by
    the number of non-selected users when ``per_user`` is true (the scale on
    which an MRT precoder leaks about ``P`` per user).  Returns 0 when every
    user is selected.
    """
    g = _gains(h, out)
    k = g.shape[0]
    sel = list(out.selected_set)
    rest = [j for j in range(k) if j not in set(sel)]
    if not rest or not sel:
        return 0.0
    total = float(g[np.ix_(rest, sel)].sum())
    return total / len(rest) if per_user else total


def d_value(h, v, beta: float) -> float:
    """``||H^T V - beta I||_F^2``."""
    h = np.asarray(h)
    v = np.asarray(v)
    if h.shape != v.shape:
        raise DimensionError(f"V shape {v.shape} does not match H shape {h.shape}")
    q = h.T @ v - beta * np.eye(h.shape[1])
    return float(np.linalg.norm(q) ** 2)


def rss(h, v, beta: float, l_users: int, k_users: int) -> float:
    """Residual sum of squares ``D/K - (1 - L/K) beta^2``."""
    if not 0 <= l_users <= k_users:
        raise ValueError(f"need 0 <= L <= K, got L={l_users}, K={k_users}")
    return d_value(h, v, beta) / k_users - (1.0 - l_users / k_users) * beta**2


def evaluate(h, out: PrecoderOutput, noise, beta: float = 1.0, weights=None) -> MetricsReport:
    """All metrics for one precoded realization."""
    k = np.asarray(h).shape[1]
    s = sinr_all(h, out, noise)
    return MetricsReport(
        per_user_sinr=s,
        per_user_rate=np.log2(1.0 + s),
        avg_throughput=avg_throughput(h, out, noise, weights),
        leakage=power_leakage(h, out),
        rss=rss(h, out.v_matrix, beta, out.n_selected, k),
        d_value=d_value(h, out.v_matrix, beta),
    )
