"""Reconstruction methods: sample consistent, strictly guided (three
implementations), blended, regularized, minimax regret, and
subspace-restricted, plus evaluation of the stability and error bounds."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    HypothesisViolated,
    IllPosedWarning,
    MissingFrame,
    MissingPrerequisite,
    NotComplementary,
    OutOfRange,
)
from .geometry import (
    AngleReport,
    HalmosDecomposition,
    SubspaceBasis,
    anderson_duffin,
    halmos,
    intersection_basis,
    principal_angles,
)
from .operators import Projector, RestrictedOperator, as_vector, oblique_project
from .solvers import SolveOptions, SolveResult, cg_solve, pocs_solve

# Residual tolerance for the reconstruction invariants on unit-scale problems.
TOL_RECON = 1e-8

# Below this cos(theta_max) the problem is declared numerically ill posed.
ILL_POSED_COS = 1e-8


@dataclass(frozen=True)
class ReconstructionProblem:
    """Sampling projector, guiding projector, and the observed sample Sf.

    ``noise_norm`` carries the known magnitude of the sample deviation, when
    available, for the a-posteriori blend-parameter selection.  The sample
    must lie in the range of the sampling projector.
    """

    s: Projector
    t: Projector
    sf: np.ndarray
    noise_norm: float | None = None

    def __post_init__(self):
        if self.s.dim != self.t.dim:
            raise ValueError("sampling and guiding projectors have different dims")
        sf = as_vector(self.sf, self.s.dim)
        object.__setattr__(self, "sf", sf)
        sf.setflags(write=False)
        scale = max(1.0, np.linalg.norm(sf))
        if np.linalg.norm(sf - self.s.apply(sf)) > TOL_RECON * scale:
            raise ValueError("sample does not lie in the sampling subspace")
        if self.noise_norm is not None and self.noise_norm < 0:
            raise OutOfRange("noise_norm must be nonnegative")

    @property
    def dim(self) -> int:
        return self.s.dim


@dataclass
class ReconstructionResult:
    """Consistent and guided endpoints of the reconstruction interval.

    ``gap_distance`` is the distance between the sample-consistent plane and
    the guiding subspace, realised as the norm of the component of the
    consistent reconstruction inside S ∩ T^perp.  ``geometry`` is present
    only when subspace bases were available to compute principal angles.
    """

    f_consistent: np.ndarray
    t_guided: np.ndarray
    solver: SolveResult
    gap_distance: float
    geometry: AngleReport | None = None
    alpha: float | None = None
    f_alpha: np.ndarray | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "f_consistent": self.f_consistent.tolist(),
                "t_guided": self.t_guided.tolist(),
                "alpha": self.alpha,
                "f_alpha": None if self.f_alpha is None else self.f_alpha.tolist(),
                "gap_distance": self.gap_distance,
                "iterations": self.solver.iterations,
                "converged": self.solver.converged,
                "geometry": None if self.geometry is None else json.loads(self.geometry.to_json()),
            }
        )


def problem_bases(p: ReconstructionProblem):
    """Subspace bases of the sampling and guiding projectors, if extractable."""
    bs = p.s.basis()
    bt = p.t.basis()
    if bs is None or bt is None:
        return None
    return SubspaceBasis(bs), SubspaceBasis(bt)


def problem_geometry(p: ReconstructionProblem) -> AngleReport | None:
    bases = problem_bases(p)
    if bases is None:
        return None
    return principal_angles(*bases)


def consistent_reconstruct(
    p: ReconstructionProblem,
    opts: SolveOptions | None = None,
    alpha: float | None = None,
    method: str = "cg",
    with_geometry: bool = True,
) -> ReconstructionResult:
    """Sample consistent reconstruction: the point of the consistent plane
    closest to the guiding subspace.

    Solves the restricted system for the unsampled component with a zero
    initial guess, which yields the normal (minimum-norm) representative
    whenever the solution is non-unique.  ``method`` selects the solver,
    "cg" (default) or "pocs".
    """
    s_perp = p.s.complement()
    t_perp = p.t.complement()
    if method == "cg":
        op = RestrictedOperator(s_perp, t_perp)
        b = -op.apply(p.sf)
        solve = cg_solve(op, b, opts)
    elif method == "pocs":
        solve = pocs_solve(s_perp, p.t, p.sf, opts)
    else:
        raise ValueError(f"unknown method {method!r}")

    f_c = p.sf + solve.solution
    t_hat = p.t.apply(f_c)
    # By the optimality system, f_c - t_hat is exactly the component of f_c
    # in S ∩ T^perp, whose norm is the plane-to-subspace distance.
    gap = float(np.linalg.norm(f_c - t_hat))

    geometry = problem_geometry(p) if with_geometry else None
    if geometry is not None and not geometry.all_angles_right:
        if geometry.cos_theta_max < ILL_POSED_COS:
            warnings.warn(
                "cos(theta_max) is numerically zero; reconstruction may not "
                "exist for every sample",
                IllPosedWarning,
                stacklevel=2,
            )

    result = ReconstructionResult(
        f_consistent=f_c,
        t_guided=t_hat,
        solver=solve,
        gap_distance=gap,
        geometry=geometry,
    )
    if alpha is not None:
        result.alpha = alpha
        result.f_alpha = blend(f_c, t_hat, alpha)
    return result


def guided_reconstruct(
    p: ReconstructionProblem,
    impl: str = "g2",
    opts: SolveOptions | None = None,
    consistent: ReconstructionResult | None = None,
) -> np.ndarray:
    """Strictly guided reconstruction: the point of the guiding subspace
    closest to the sample-consistent plane.

    Three algebraically equivalent implementations that converge to the same
    signal but behave differently when iterations are truncated:

    * ``g1`` solves the frame-coordinate system B_T* S B_T y = B_T* Sf and
      synthesizes t = B_T y (requires a frame on the guiding projector);
    * ``g2`` solves T S T t = T Sf with projector actions only, so the
      sampling subspace never needs an explicit description;
    * ``g3`` projects an already computed consistent reconstruction onto the
      guiding subspace.
    """
    impl = impl.lower()
    if impl == "g3":
        if consistent is None:
            raise MissingPrerequisite("g3 needs a prior consistent reconstruction")
        return p.t.apply(consistent.f_consistent)
    if impl == "g1":
        t = p.t
        if not hasattr(t, "analyze") or not hasattr(t, "synthesize"):
            raise MissingFrame("g1 needs a guiding projector with a frame")
        op = lambda y: t.analyze(p.s.apply(t.synthesize(y)))
        b = t.analyze(p.sf)
        solve = cg_solve(op, b, opts)
        return t.synthesize(solve.solution)
    if impl == "g2":
        op = lambda v: p.t.apply(p.s.apply(p.t.apply(v)))
        b = p.t.apply(p.sf)
        solve = cg_solve(op, b, opts)
        return solve.solution
    raise ValueError(f"unknown implementation {impl!r}")


def blend(f_c, t_hat, alpha: float) -> np.ndarray:
    """Point alpha*f_c + (1-alpha)*t_hat of the reconstruction interval."""
    if not 0.0 <= alpha <= 1.0:
        raise OutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    f_c = as_vector(f_c)
    t_hat = as_vector(t_hat, f_c.shape[0])
    return alpha * f_c + (1.0 - alpha) * t_hat


def regularized_reconstruct(
    p: ReconstructionProblem, rho: float, opts: SolveOptions | None = None
) -> np.ndarray:
    """Penalty reconstruction solving (S + rho * T_perp) f = Sf by CG.

    Equivalent to the blend with alpha = 1 / (1 + rho).  When the operator is
    singular (nontrivial S_perp ∩ T) the zero initial guess makes this the
    normal solution.
    """
    if rho <= 0:
        raise OutOfRange("rho must be positive")
    t_perp = p.t.complement()
    op = lambda v: p.s.apply(v) + rho * t_perp.apply(v)
    solve = cg_solve(op, p.sf, opts)
    return solve.solution


def select_alpha(p: ReconstructionProblem, f_c) -> float:
    """Blend parameter from a known sample-noise magnitude:
    1 - alpha = ||n|| / ||f_c - T f_c||, clamped to [0, 1].

    When the consistent reconstruction already lies in the guiding subspace
    the interval degenerates and alpha = 1 is returned.
    """
    if p.noise_norm is None:
        raise MissingPrerequisite("problem has no noise_norm")
    f_c = as_vector(f_c, p.dim)
    denom = float(np.linalg.norm(f_c - p.t.apply(f_c)))
    if denom == 0.0:
        return 1.0
    return float(np.clip(1.0 - p.noise_norm / denom, 0.0, 1.0))


def minimax_regret(p: ReconstructionProblem) -> np.ndarray:
    """One-shot reconstruction T Sf: a single projector composition."""
    return p.t.apply(p.sf)


def reconstruct_in_subspace(
    p: ReconstructionProblem, m: SubspaceBasis, opts: SolveOptions | None = None
) -> np.ndarray:
    """Consistent reconstruction with the unsampled component restricted to
    a subspace complementary to S_perp ∩ T.

    The restriction selects one representative per equivalence class of
    solutions; the normal solution corresponds to m = (S_perp ∩ T)^perp.
    """
    bases = problem_bases(p)
    if bases is None:
        raise MissingPrerequisite("projectors expose no bases for the complementarity check")
    bs, bt = bases
    spt = intersection_basis(bs.complement(), bt)
    if m.k + spt.k != p.dim or intersection_basis(m, spt).k != 0:
        raise NotComplementary("m is not complementary to S_perp ∩ T")
    s_perp = p.s.complement()
    f = anderson_duffin(m.projector(), s_perp)
    t_perp = p.t.complement()
    op = lambda v: f.apply(t_perp.apply(v))
    b = -f.apply(t_perp.apply(p.sf))
    solve = cg_solve(op, b, opts)
    return p.sf + solve.solution


@dataclass
class BoundReport:
    """Measured stability/error quantities next to their theoretical bounds.

    Stability: x_norm against cos_bound, tan_bound, and (squared, including
    the sample energy) fnog_bound.  Error: err_measured against
    err_bound_cos2 and err_bound_cos1.  The two orthogonal error identities
    are reported through their residuals.
    """

    x_norm: float
    cos_bound: float
    tan_bound: float
    fnog_bound: float
    f_n_norm_sq: float
    err_measured: float
    err_bound_cos2: float
    err_bound_cos1: float
    err_m_sq: float
    err_n_sq: float
    identity_m_residual: float
    identity_n_residual: float
    cos_theta_max: float

    def to_json(self) -> str:
        return json.dumps(self.__dict__)


def evaluate_bounds(
    p: ReconstructionProblem,
    f_true,
    result: ReconstructionResult,
    h: HalmosDecomposition,
) -> BoundReport:
    """Evaluate the stability bounds and reconstruction-error bounds against
    a known original signal (diagnostic oracle mode)."""
    f = as_vector(f_true, p.dim)
    geometry = result.geometry or problem_geometry(p)
    if geometry is None:
        raise MissingPrerequisite("bounds need principal angles; none computable")
    cos_t = geometry.cos_theta_max
    if cos_t <= 0.0:
        raise HypothesisViolated("bounds require cos(theta_max) > 0")
    sin_t = np.sin(geometry.theta_max)

    s, t_perp, s_perp = p.s, p.t.complement(), p.s.complement()
    x_n = result.f_consistent - p.sf
    p0f = h.p0.apply(f)

    x_norm = float(np.linalg.norm(x_n))
    cos_bound = float(np.linalg.norm(t_perp.apply(s.apply(p0f))) / cos_t)
    tan_bound = float(np.linalg.norm(s.apply(p0f)) * sin_t / cos_t)
    fnog_bound = float(
        np.linalg.norm(p.sf) ** 2
        + np.linalg.norm(s_perp.apply(t_perp.apply(p.sf))) ** 2 / cos_t**4
    )
    f_n_norm_sq = float(np.linalg.norm(p.sf) ** 2 + x_norm**2)

    err_vec = x_n - s_perp.apply(p0f)
    err_measured = float(np.linalg.norm(err_vec))
    err_bound_cos2 = float(np.linalg.norm(s_perp.apply(t_perp.apply(p0f))) / cos_t**2)
    err_bound_cos1 = float(np.linalg.norm(t_perp.apply(p0f)) / cos_t)

    diff = result.f_consistent - f
    m_diff = diff - h.p_sperp_t.apply(diff)
    err_m_sq = float(np.linalg.norm(m_diff) ** 2)
    err_n_sq = float(np.linalg.norm(diff) ** 2)
    sperp_tperp_sq = float(np.linalg.norm(h.p_sperp_tperp.apply(f)) ** 2)
    sperp_t_sq = float(np.linalg.norm(h.p_sperp_t.apply(f)) ** 2)
    identity_m = abs(err_m_sq - (sperp_tperp_sq + err_measured**2))
    identity_n = abs(err_n_sq - (sperp_t_sq + sperp_tperp_sq + err_measured**2))

    return BoundReport(
        x_norm=x_norm,
        cos_bound=cos_bound,
        tan_bound=tan_bound,
        fnog_bound=fnog_bound,
        f_n_norm_sq=f_n_norm_sq,
        err_measured=err_measured,
        err_bound_cos2=err_bound_cos2,
        err_bound_cos1=err_bound_cos1,
        err_m_sq=err_m_sq,
        err_n_sq=err_n_sq,
        identity_m_residual=identity_m,
        identity_n_residual=identity_n,
        cos_theta_max=cos_t,
    )


def verify_quotient_equivalence(
    p: ReconstructionProblem, f_true, opts: SolveOptions | None = None
) -> bool:
    """Check that the quotient-space route (oblique projection of the reduced
    signal) reproduces the consistent reconstruction: f_c = f_g + P_{S∩T^perp} f.

    Requires the uniqueness condition S_perp ∩ T = {0}.
    """
    bases = problem_bases(p)
    if bases is None:
        raise MissingPrerequisite("projectors expose no bases")
    bs, bt = bases
    f = as_vector(f_true, p.dim)
    if intersection_basis(bs.complement(), bt).k != 0:
        raise HypothesisViolated("S_perp ∩ T must be trivial")

    result = consistent_reconstruct(p, opts, with_geometry=False)
    f_g = guided_reconstruct(p, "g2", opts)

    h = halmos(bs, bt)
    p_st_perp_f = h.p_st_perp.apply(f)
    reduced = f - p_st_perp_f
    f_g_oblique = oblique_project(reduced, bt, bs)

    scale = max(1.0, np.linalg.norm(f))
    ok_decomp = np.linalg.norm(result.f_consistent - (f_g + p_st_perp_f)) <= 1e-8 * scale
    ok_oblique = np.linalg.norm(f_g - f_g_oblique) <= 1e-8 * scale
    return bool(ok_decomp and ok_oblique)
