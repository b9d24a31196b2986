"""Group-LASSO precoding programs.

Two programs over the ``M x K`` precoding matrix ``V`` are handled here:

* the penalized (RLS) form::

      min_V ||H^T V - beta I||_F^2 + lam ||V||_F^2 + mu ||V||_{2,1}

  solved by (accelerated) proximal gradient with the exact block prox, and

* the constrained form::

      min_V ||H^T V - beta I||_F^2   s.t.  ||V||_{2,1} <= eta L,  ||V||_F^2 <= P

  solved by searching the regularizers of the penalized form.

Complex gradients follow the full real-differential convention: ``G`` packs
``df/dRe + 1j df/dIm``, so for ``f = ||A v - b||^2`` the gradient is
``2 A^H (A v - b)``.  Iterates move as ``V <- V - t G``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import DimensionError

__all__ = [
    "SolverConfig",
    "SolverResult",
    "NumericDivergenceError",
    "InfeasibleError",
    "objective",
    "data_fit",
    "l21_norm",
    "smooth_gradient",
    "block_soft_threshold",
    "spectral_norm",
    "kkt_residual",
    "kkt_bound",
    "zero_threshold",
    "solve_rls",
    "solve_constrained",
]

log = logging.getLogger(__name__)


class NumericDivergenceError(ArithmeticError):
    """Iterates became non-finite."""


class InfeasibleError(RuntimeError):
    """The regularizer search could not reach a feasible point."""


@dataclass(frozen=True)
class SolverConfig:
    """Regularizers and stopping rules shared by both programs.

    ``lam`` is the ridge weight, ``mu`` the group-sparsity weight, ``beta``
    the target channel-inversion gain and ``eta`` the relaxation factor of
    the ``l_{2,1}`` budget ``eta * L``.
    """

    lam: float = 0.0
    mu: float = 0.0
    beta: float = 1.0
    eta: float = 1.0
    max_iterations: int = 5000
    tolerance: float = 1e-8
    acceleration: bool = True

    def __post_init__(self):
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        if not (self.mu >= 0 and np.isfinite(self.mu)):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class SolverResult:
    v_matrix: np.ndarray
    iterations: int
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    kkt_residual: float = 0.0
    lam: float = 0.0
    mu: float = 0.0

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")


def _check_pair(h, v):
    h = np.asarray(h)
    v = np.asarray(v)
    if h.ndim != 2 or v.ndim != 2 or h.shape != v.shape:
        raise DimensionError(f"V must match H's shape {h.shape}, got {v.shape}")
    return h, v


def l21_norm(v) -> float:
    """Sum of column Euclidean norms."""
    return float(np.linalg.norm(np.asarray(v), axis=0).sum())


def data_fit(h, v, beta: float) -> float:
    """``||H^T V - beta I||_F^2``."""
    h, v = _check_pair(h, v)
    r = h.T @ v
    r[np.diag_indices_from(r)] -= beta
    return float(np.vdot(r, r).real)


def objective(h, v, cfg: SolverConfig) -> float:
    """Penalized objective: data fit + ``lam ||V||_F^2`` + ``mu ||V||_{2,1}``."""
    h, v = _check_pair(h, v)
    fro2 = float(np.vdot(v, v).real)
    return data_fit(h, v, cfg.beta) + cfg.lam * fro2 + cfg.mu * l21_norm(v)


def smooth_gradient(h, v, lam: float, beta: float) -> np.ndarray:
    """Gradient of the smooth part, ``2 [conj(H) (H^T V - beta I) + lam V]``."""
    h, v = _check_pair(h, v)
    r = h.T @ v
    r[np.diag_indices_from(r)] -= beta
    return 2.0 * (h.conj() @ r + lam * v)


def block_soft_threshold(v, threshold: float) -> np.ndarray:
    """Prox of ``threshold * ||.||_{2,1}``: shrink every column's norm by ``threshold``.

    Columns whose norm does not exceed the threshold come back as exact zeros.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    v = np.asarray(v)
    if threshold == 0:
        return v.copy()
    norms = np.linalg.norm(v, axis=0)
    keep = norms > threshold
    out = np.zeros_like(v)
    scale = 1.0 - threshold / norms[keep]
    out[:, keep] = v[:, keep] * scale
    return out


def spectral_norm(h, max_iter: int = 50, rtol: float = 1e-10) -> float:
    """Largest singular value of ``H`` by power iteration on ``H^H H``."""
    a = np.asarray(h)
    k = a.shape[1]
    x = np.ones(k, dtype=a.dtype) / np.sqrt(k)
    est = 0.0
    for _ in range(max_iter):
        y = a.conj().T @ (a @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        new = float(np.vdot(x, y).real)
        x = y / nrm
        if est > 0 and abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    # Rayleigh quotient of the last normalized iterate
    est = max(est, float(np.linalg.norm(a @ x) ** 2))
    return float(np.sqrt(est))


def zero_threshold(h, beta: float) -> float:
    """Smallest ``mu`` for which ``V = 0`` solves the penalized program."""
    return 2.0 * beta * float(np.linalg.norm(np.asarray(h), axis=0).max())


def kkt_residual(h, v, cfg: SolverConfig) -> float:
    """Norm of the minimal-norm subgradient of the penalized objective at ``v``."""
    g = smooth_gradient(h, v, cfg.lam, cfg.beta)
    norms_v = np.linalg.norm(v, axis=0)
    res = np.empty(v.shape[1])
    nz = norms_v > 0
    res[nz] = np.linalg.norm(g[:, nz] + cfg.mu * v[:, nz] / norms_v[nz], axis=0)
    res[~nz] = np.maximum(np.linalg.norm(g[:, ~nz], axis=0) - cfg.mu, 0.0)
    return float(np.linalg.norm(res))


def kkt_bound(h, cfg: SolverConfig) -> float:
    """KKT residual below which a solve counts as converged.

    Scaled by the gradient norm at ``V = 0``, ``2 beta ||H||_F``.
    """
    return float(np.sqrt(cfg.tolerance) * 2.0 * cfg.beta * np.linalg.norm(np.asarray(h)))


def solve_rls(h, cfg: SolverConfig, v0=None, lipschitz: float | None = None) -> SolverResult:
    """Proximal gradient on the penalized program, FISTA when ``cfg.acceleration``.

    Starts at ``v0`` (zero by default) with step ``1/L_f``,
    ``L_f = 2 (sigma_max(H)^2 + lam)``, and stops once the relative change of
    the objective drops to ``cfg.tolerance`` (with the KKT residual under
    :func:`kkt_bound`) or the iteration cap is hit.
    ``lipschitz`` may carry a precomputed ``sigma_max(H)^2`` to skip the
    power iteration.
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise DimensionError("H must be a matrix")
    if not np.all(np.isfinite(h)):
        raise ValueError("H must be finite")
    m, k = h.shape
    beta, lam, mu = cfg.beta, cfg.lam, cfg.mu

    smax2 = spectral_norm(h) ** 2 if lipschitz is None else lipschitz
    step = 1.0 / (2.0 * (smax2 + lam))
    ht = h.T
    hc = h.conj()
    diag = np.diag_indices(k)

    def value(v):
        r = ht @ v
        r[diag] -= beta
        return (float(np.vdot(r, r).real) + lam * float(np.vdot(v, v).real)
                + mu * float(np.linalg.norm(v, axis=0).sum()))

    def prox_step(y):
        r = ht @ y
        r[diag] -= beta
        g = 2.0 * (hc @ r + lam * y)
        return block_soft_threshold(y - step * g, step * mu)

    if v0 is None:
        v = np.zeros((m, k), dtype=np.complex128)
    else:
        v = np.array(v0, dtype=np.complex128, copy=True)
        if v.shape != (m, k):
            raise DimensionError(f"warm start must be {m}x{k}")

    bound = kkt_bound(h, cfg)
    # objective at V = 0 is beta^2 K; below eps of that, changes are rounding
    f_floor = np.finfo(float).eps * beta * beta * k
    f = value(v)
    trace = [f]
    kkt = None
    y = v
    theta = 1.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        v_new = prox_step(y)
        f_new = value(v_new)
        if not np.isfinite(f_new):
            raise NumericDivergenceError(f"objective became {f_new} at iteration {it}")
        if cfg.acceleration:
            if f_new > f:
                # adaptive restart: drop momentum, retake a plain step from v
                theta = 1.0
                v_new = prox_step(v)
                f_new = value(v_new)
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            y = v_new + ((theta - 1.0) / theta_new) * (v_new - v)
            theta = theta_new
        else:
            y = v_new
        trace.append(f_new)
        change = abs(f - f_new)
        v, f = v_new, f_new
        if change <= cfg.tolerance * max(abs(f), f_floor):
            kkt = kkt_residual(h, v, cfg)
            if kkt <= bound:
                converged = True
                break
    else:
        kkt = kkt_residual(h, v, cfg)

    return SolverResult(
        v_matrix=v,
        iterations=it,
        objective_trace=trace,
        converged=converged,
        kkt_residual=kkt,
        lam=lam,
        mu=mu,
    )


_BISECT_STEPS = 60
_BISECT_RTOL = 1e-6
_FEAS_RTOL = 1e-6
_LAM_FLOOR = 1e-12
# absolute bracket width, relative to the natural scale of each regularizer
_SEARCH_ATOL = 1e-9


def _bracket_search(lo, hi, evaluate, excess, first=None, lo_excess=None, atol=0.0):
    """Find the smallest feasible regularizer in ``[lo, hi]``; ``hi`` must be feasible.

    ``excess(res)`` is the relative constraint violation (``<= _FEAS_RTOL``
    means feasible) and decreases as the regularizer grows.  Trial points
    come from Illinois false position on the bracket (in log scale when
    ``lo > 0``), falling back to bisection when unusable.  Stops after
    ``_BISECT_STEPS`` probes, when the bracket is narrower than
    ``_BISECT_RTOL * hi + atol``, or
    when the constraint at ``hi`` is active to within ``_FEAS_RTOL``.

    Returns the result at the smallest feasible point visited and whether
    any probe came out infeasible.
    """
    best = evaluate(hi) if first is None else first
    e_hi = excess(best)
    if e_hi > _FEAS_RTOL:
        raise InfeasibleError(f"upper bracket {hi} is not feasible")
    use_log = lo > 0
    fwd = np.log if use_log else (lambda x: x)
    inv = np.exp if use_log else (lambda x: x)
    e_lo = lo_excess
    side = 0
    hit_infeasible = False
    for _ in range(_BISECT_STEPS):
        if hi - lo <= _BISECT_RTOL * hi + atol or e_hi >= -_FEAS_RTOL:
            break
        a, b = fwd(lo), fwd(hi)
        mid = None
        if e_lo is not None and e_lo > e_hi:
            x = b - e_hi * (b - a) / (e_hi - e_lo)
            if a + 1e-3 * (b - a) < x < b - 1e-3 * (b - a):
                mid = inv(x)
        if mid is None:
            mid = np.sqrt(lo * hi) if use_log and hi / lo > 4 else 0.5 * (lo + hi)
        res = evaluate(mid)
        e = excess(res)
        if e <= _FEAS_RTOL:
            hi, best, e_hi = mid, res, e
            if side == 1 and e_lo is not None:
                e_lo *= 0.5
            side = 1
        else:
            lo, e_lo = mid, e
            hit_infeasible = True
            if side == -1:
                e_hi *= 0.5
            side = -1
    return best, hit_infeasible


def solve_constrained(h, power: float, l_users: int, cfg: SolverConfig) -> SolverResult:
    """Constrained group LASSO via regularizer search on :func:`solve_rls`.

    For a given ridge weight the group weight ``mu`` is searched upward from
    ``cfg.mu`` (bracket ``[cfg.mu, 2 beta max_k ||h_k||]``) for the smallest
    value giving ``||V||_{2,1} <= eta L``; if the result still exceeds the
    power budget the ridge weight is searched upward from ``cfg.lam`` on the
    same rule.  Every inner solve is warm-started from the last iterate.
    """
    h = np.asarray(h)
    k = h.shape[1]
    if not 1 <= l_users <= k:
        raise ValueError(f"need 1 <= L <= K={k}, got L={l_users}")
    if not power > 0:
        raise ValueError("power must be > 0")
    budget = cfg.eta * l_users
    smax2 = spectral_norm(h) ** 2
    mu_hi = max(zero_threshold(h, cfg.beta), cfg.mu)
    state = {"v": None}

    def run(lam, mu):
        res = solve_rls(h, cfg.with_(lam=lam, mu=mu), v0=state["v"], lipschitz=smax2)
        state["v"] = res.v_matrix
        return res

    def sparse_excess(res):
        return l21_norm(res.v_matrix) / budget - 1.0

    def power_excess(res):
        return float(np.vdot(res.v_matrix, res.v_matrix).real) / power - 1.0

    def power_ok(res):
        return power_excess(res) <= _FEAS_RTOL

    def fit_budget(lam):
        res = run(lam, cfg.mu)
        e = sparse_excess(res)
        if e <= _FEAS_RTOL:
            return res
        return _bracket_search(cfg.mu, mu_hi, lambda mu: run(lam, mu), sparse_excess,
                               lo_excess=e, atol=_SEARCH_ATOL * mu_hi)[0]

    # Search the ridge weight from the feasible side: probes at small lam are
    # the ill-conditioned, slow ones, so cfg.lam itself is only solved when
    # the search collapses onto it.
    lo = cfg.lam
    hi = max(2.0 * cfg.lam, 1.0)
    probe = fit_budget(hi)
    for _ in range(200):
        if power_ok(probe):
            break
        lo, hi = hi, 4.0 * hi
        probe = fit_budget(hi)
    else:
        raise InfeasibleError("could not bracket the ridge weight for the power budget")
    if lo > cfg.lam:
        return _bracket_search(lo, hi, fit_budget, power_excess, first=probe)[0]
    floor = cfg.lam if cfg.lam > 0 else hi * _LAM_FLOOR
    # ridge weights far below the spectrum only perturb V at round-off level
    res, hit_infeasible = _bracket_search(floor, hi, fit_budget, power_excess, first=probe,
                                          atol=_SEARCH_ATOL * smax2)
    if not hit_infeasible:
        state["v"] = None
        base = fit_budget(cfg.lam)
        if power_ok(base):
            return base
    return res
