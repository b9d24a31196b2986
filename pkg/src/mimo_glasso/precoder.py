"""Joint user selection and precoding, plus the MRT random-selection baseline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DimensionError, RngLike, as_generator
from .solver import SolverConfig, SolverResult, solve_constrained

__all__ = [
    "PrecoderOutput",
    "DegenerateSolutionError",
    "DegenerateChannelError",
    "decompose",
    "top_columns",
    "group_lasso_precoder",
    "mrt_random",
]


class DegenerateSolutionError(RuntimeError):
    """The group-LASSO solution has no nonzero column to select from."""

    def __init__(self, message: str, result: SolverResult | None = None):
        super().__init__(message)
        self.result = result


class DegenerateChannelError(ValueError):
    """A selected user has an all-zero channel vector."""


@dataclass
class PrecoderOutput:
    """Beamformers ``W``, powers ``p`` and selection ``S`` with ``V = W diag(sqrt(p))``.

    ``selected_set`` holds 0-based user indices in ascending order.
    """

    w_matrix: np.ndarray
    power_vector: np.ndarray
    selected_set: tuple
    v_matrix: np.ndarray
    solver_result: SolverResult | None = None

    @property
    def total_power(self) -> float:
        return float(np.vdot(self.v_matrix, self.v_matrix).real)

    @property
    def n_selected(self) -> int:
        return len(self.selected_set)

    def summary(self) -> dict:
        out = {
            "selected_set": [int(k) for k in self.selected_set],
            "power_vector": [float(p) for p in self.power_vector],
            "total_power": self.total_power,
        }
        if self.solver_result is not None:
            r = self.solver_result
            out["solver"] = {
                "iterations": r.iterations,
                "converged": bool(r.converged),
                "kkt_residual": r.kkt_residual,
                "lambda": r.lam,
                "mu": r.mu,
            }
        return out


def decompose(v):
    """Split ``V`` into unit-norm beamformers and per-user powers.

    Zero columns map to ``w_k = 0`` and ``p_k = 0``.
    """
    v = np.asarray(v)
    norms = np.linalg.norm(v, axis=0)
    w = np.zeros_like(v, dtype=np.complex128)
    nz = norms > 0
    w[:, nz] = v[:, nz] / norms[nz]
    return w, norms**2


def top_columns(v, count: int) -> tuple:
    """Indices of the ``count`` columns of largest norm; ties go to the lower index."""
    norms = np.linalg.norm(np.asarray(v), axis=0)
    order = np.lexsort((np.arange(norms.size), -norms))
    return tuple(sorted(int(i) for i in order[:count]))


def _check_l(h, l_users):
    k = h.shape[1]
    if int(l_users) != l_users or not 1 <= l_users <= k:
        raise ValueError(f"need 1 <= L <= K={k}, got L={l_users}")
    return int(l_users)


def _finish(v, selected, solver_result=None) -> PrecoderOutput:
    w, p = decompose(v)
    return PrecoderOutput(w_matrix=w, power_vector=p, selected_set=selected,
                          v_matrix=v, solver_result=solver_result)


def group_lasso_precoder(h, power: float, l_users: int, cfg: SolverConfig | None = None) -> PrecoderOutput:
    """Select ``L`` users and precode them from the constrained group-LASSO solution.

    The ``L`` strongest columns of the solution are kept, the rest zeroed, and
    the result rescaled to total power ``power`` before decomposition.
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise DimensionError("H must be a matrix")
    l_users = _check_l(h, l_users)
    if not power > 0:
        raise ValueError("power must be > 0")
    cfg = SolverConfig() if cfg is None else cfg

    res = solve_constrained(h, power, l_users, cfg)
    v = res.v_matrix
    norms = np.linalg.norm(v, axis=0)
    if not np.any(norms > 0):
        raise DegenerateSolutionError(
            f"solver returned V = 0 (lambda={res.lam:g}, mu={res.mu:g}); try a smaller mu", res)
    selected = top_columns(v, l_users)
    out = np.zeros_like(v)
    idx = list(selected)
    out[:, idx] = v[:, idx]
    out *= np.sqrt(power) / np.linalg.norm(out)
    return _finish(out, selected, res)


def mrt_random(h, power: float, l_users: int, rng: RngLike) -> PrecoderOutput:
    """MRT toward ``L`` users drawn uniformly at random, equal power ``P/L`` each.

    The subset depends only on ``rng``; the channel shapes the vectors only.
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise DimensionError("H must be a matrix")
    l_users = _check_l(h, l_users)
    if not power > 0:
        raise ValueError("power must be > 0")
    m, k = h.shape
    gen = as_generator(rng)
    selected = tuple(sorted(int(i) for i in gen.choice(k, size=l_users, replace=False)))
    v = np.zeros((m, k), dtype=np.complex128)
    for j in selected:
        nrm = np.linalg.norm(h[:, j])
        if nrm == 0:
            raise DegenerateChannelError(f"user {j} has a zero channel vector")
        v[:, j] = np.sqrt(power / l_users) * h[:, j].conj() / nrm
    return _finish(v, selected)
