"""Matrix-free conjugate gradient and POCS/Richardson iterations for
self-adjoint PSD operators given by their action."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DivergentBound, NumericalBreakdown, OutOfRange
from .operators import Projector, as_vector

DEFAULT_TOL = 1e-12
BREAKDOWN_TOL = 1e-300


class _Meter:
    """Thread-safe invocation counter for solver-cost accounting."""

    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def bump(self):
        with self._lock:
            self._n += 1

    @property
    def value(self):
        return self._n


cg_meter = _Meter()
pocs_meter = _Meter()


@dataclass(frozen=True)
class SolveOptions:
    tol: float = DEFAULT_TOL
    max_iter: int | None = None  # None means 10 * dim
    record_history: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise OutOfRange("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise OutOfRange("max_iter must be at least 1")

    def iterations_for(self, dim: int) -> int:
        return self.max_iter if self.max_iter is not None else 10 * dim


@dataclass
class SolveResult:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "solution": self.solution.tolist(),
                "iterations": self.iterations,
                "residual_history": list(self.residual_history),
                "converged": self.converged,
            }
        )

    def history_csv_lines(self):
        """Residual history as `iter,relres` CSV lines."""
        return [f"{m},{r!r}" for m, r in enumerate(self.residual_history, start=1)]


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise NumericalBreakdown("non-finite values during iteration")


def cg_solve(op, b, opts: SolveOptions | None = None, callback=None) -> SolveResult:
    """Conjugate gradient for K x = b with K self-adjoint PSD, x0 = 0.

    ``op`` is the operator action (vector in, vector out).  Starting from
    zero keeps every iterate inside the Krylov space of b, so when K is
    singular the method converges to the normal (minimum-norm) solution.
    A vanishing search-curvature <p, Kp> means b has been exhausted and is
    treated as benign convergence.
    """
    cg_meter.bump()
    opts = opts or SolveOptions()
    b = as_vector(b)
    history: list[float] = []
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return SolveResult(np.zeros_like(b), 0, history, converged=True)

    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    converged = False
    iterations = 0
    for _ in range(opts.iterations_for(b.shape[0])):
        kp = np.asarray(op(p), dtype=float)
        _check_finite(kp)
        pkp = float(p @ kp)
        if pkp <= BREAKDOWN_TOL:
            converged = True
            break
        alpha = rs / pkp
        x += alpha * p
        r -= alpha * kp
        _check_finite(x)
        iterations += 1
        rs_new = float(r @ r)
        relres = np.sqrt(rs_new) / nb
        if opts.record_history:
            history.append(relres)
        if callback is not None:
            callback(x.copy())
        if relres <= opts.tol:
            converged = True
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return SolveResult(x, iterations, history, converged)


def pocs_solve(
    s_perp: Projector,
    t: Projector,
    sf,
    opts: SolveOptions | None = None,
    callback=None,
) -> SolveResult:
    """Alternating-projection (POCS) iteration x_m = S_perp T (Sf + x_{m-1}), x0 = 0.

    This is the Richardson iteration x_m = (I - K) x_{m-1} + b for the same
    restricted system CG solves, so the two share a fixed point.  The
    iterate difference equals the Richardson residual b - K x_{m-1}, which
    drives the stopping rule; the returned iterate is one contraction step
    past the certified one.
    """
    pocs_meter.bump()
    opts = opts or SolveOptions()
    sf = as_vector(sf, s_perp.dim)
    history: list[float] = []
    b = -s_perp.apply(sf - t.apply(sf))
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return SolveResult(np.zeros_like(sf), 0, history, converged=True)

    x = np.zeros_like(sf)
    converged = False
    iterations = 0
    for _ in range(opts.iterations_for(sf.shape[0])):
        x_next = s_perp.apply(t.apply(sf + x))
        _check_finite(x_next)
        iterations += 1
        relres = np.linalg.norm(x_next - x) / nb
        x = x_next
        if opts.record_history:
            history.append(relres)
        if callback is not None:
            callback(x.copy())
        if relres <= opts.tol:
            converged = True
            break
    return SolveResult(x, iterations, history, converged)


def convergence_bound(method: str, cos_theta_max: float, m: int) -> float:
    """A-priori relative-error bound after m iterations.

    POCS contracts the error by at most 1 - cos^2(theta_max) per step; CG
    satisfies the K-norm bound 2 ((1 - cos) / (1 + cos))^m via the condition
    number bound kappa <= 1 / cos^2(theta_max).
    """
    if m < 0:
        raise OutOfRange("iteration count must be nonnegative")
    if cos_theta_max <= 0.0:
        raise DivergentBound("bound undefined for cos(theta_max) = 0")
    if cos_theta_max > 1.0 + 1e-12:
        raise OutOfRange("cos(theta_max) cannot exceed 1")
    c = min(cos_theta_max, 1.0)
    key = method.strip().lower()
    if key == "pocs":
        base, factor = 1.0 - c * c, 1.0
    elif key == "cg":
        base, factor = (1.0 - c) / (1.0 + c), 2.0
    else:
        raise ValueError(f"unknown method {method!r}")
    if base == 0.0:
        return 0.0
    return factor * base**m
