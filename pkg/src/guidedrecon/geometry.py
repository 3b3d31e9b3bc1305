"""Principal angles, minimal gaps, subspace intersections, and the
five-space decomposition underlying every stability bound."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, EmptySubspace
from .operators import (
    BasisProjector,
    MatrixProjector,
    Projector,
    complement_basis,
    orthonormalize,
)

# An angle counts as zero when its cosine exceeds 1 - COS_ZERO_TOL and as a
# right angle when the cosine drops below COS_RIGHT_TOL.
COS_ZERO_TOL = 1e-10
COS_RIGHT_TOL = 1e-10

# Singular values of basis products at least this close to 1 flag an
# intersection direction.
INTERSECT_TOL = 1e-8

# Relative cutoff for the pseudo-inverse in the intersection-projector formula.
PINV_CUTOFF = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal column basis of a subspace; k = 0 encodes the zero subspace."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=float)
        if cols.ndim != 2:
            raise DimensionMismatch("basis must be a dim x k matrix")
        k = cols.shape[1]
        if k and not np.allclose(cols.T @ cols, np.eye(k), atol=1e-10):
            raise ValueError("basis columns are not orthonormal to 1e-10")
        object.__setattr__(self, "columns", cols)
        cols.setflags(write=False)

    @classmethod
    def from_span(cls, columns) -> "SubspaceBasis":
        """Orthonormalize an arbitrary spanning set."""
        return cls(orthonormalize(columns))

    @classmethod
    def empty(cls, dim: int) -> "SubspaceBasis":
        return cls(np.zeros((dim, 0)))

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def k(self) -> int:
        return self.columns.shape[1]

    def projector(self) -> BasisProjector:
        return BasisProjector(self.columns)

    def complement(self) -> "SubspaceBasis":
        return SubspaceBasis(complement_basis(self.columns, self.dim))


@dataclass(frozen=True)
class AngleReport:
    """Principal angles between two subspaces plus the derived scalars.

    ``angles`` is nonincreasing, in radians.  ``all_angles_zero`` marks the
    degenerate case where no nonzero angle exists (identical subspaces up to
    tolerance; minimal_gap falls back to 1), and ``all_angles_right`` the case
    where no non-right angle exists (fully orthogonal subspaces; theta_max
    falls back to 0 so cos(theta_max) = 1).
    """

    angles: tuple
    theta_max: float
    cos_theta_max: float
    minimal_gap: float
    condition_bound: float
    all_angles_zero: bool = False
    all_angles_right: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "angles": list(self.angles),
                "theta_max": self.theta_max,
                "cos_theta_max": self.cos_theta_max,
                "minimal_gap": self.minimal_gap,
                "condition_bound": self.condition_bound,
                "all_angles_zero": self.all_angles_zero,
                "all_angles_right": self.all_angles_right,
            }
        )


def principal_angles(a: SubspaceBasis, b: SubspaceBasis) -> AngleReport:
    """Principal angles between span(a) and span(b).

    The angles are the arccosines of the singular values of a^T b, which
    coincides with the two-sided angle set: one-sided angle sets from either
    subspace differ from it only by padding with right angles.
    """
    if a.dim != b.dim:
        raise DimensionMismatch("subspaces live in different ambient spaces")
    if a.k == 0 or b.k == 0:
        raise EmptySubspace("principal angles need two nonempty subspaces")
    sigma = np.linalg.svd(a.columns.T @ b.columns, compute_uv=False)
    sigma = np.clip(sigma, 0.0, 1.0)
    angles = np.sort(np.arccos(sigma))[::-1]  # nonincreasing

    cos_all = np.cos(angles)
    nontrivial = cos_all >= COS_RIGHT_TOL  # excludes right angles
    nonzero = cos_all <= 1.0 - COS_ZERO_TOL  # excludes zero angles

    if np.any(nontrivial):
        theta_max = float(np.max(angles[nontrivial]))
        cos_theta_max = math.cos(theta_max)
        all_right = False
    else:
        theta_max, cos_theta_max, all_right = 0.0, 1.0, True

    if np.any(nonzero):
        minimal_gap = float(np.sin(np.min(angles[nonzero])))
        all_zero = False
    else:
        minimal_gap, all_zero = 1.0, True

    condition = 1.0 / cos_theta_max**2 if cos_theta_max > 0 else math.inf
    return AngleReport(
        angles=tuple(float(t) for t in angles),
        theta_max=theta_max,
        cos_theta_max=cos_theta_max,
        minimal_gap=minimal_gap,
        condition_bound=condition,
        all_angles_zero=all_zero,
        all_angles_right=all_right,
    )


def intersection_basis(a: SubspaceBasis, b: SubspaceBasis) -> SubspaceBasis:
    """Orthonormal basis of span(a) ∩ span(b); k = 0 when the intersection is trivial.

    Directions are the singular vectors of a^T b with singular value within
    INTERSECT_TOL of 1, refined by one projection through b.
    """
    if a.dim != b.dim:
        raise DimensionMismatch("subspaces live in different ambient spaces")
    if a.k == 0 or b.k == 0:
        return SubspaceBasis.empty(a.dim)
    u, sigma, _ = np.linalg.svd(a.columns.T @ b.columns)
    sel = sigma >= 1.0 - INTERSECT_TOL
    if not np.any(sel):
        return SubspaceBasis.empty(a.dim)
    cand = a.columns @ u[:, sel]
    # One refinement pass: project into b and re-orthonormalize.
    cand = b.columns @ (b.columns.T @ cand)
    q, _ = np.linalg.qr(cand)
    return SubspaceBasis(q)


def anderson_duffin(m: Projector, s_perp: Projector) -> MatrixProjector:
    """Projector onto range(m) ∩ range(s_perp) via F = 2 M (M + S_perp)^† S_perp."""
    if m.dim != s_perp.dim:
        raise DimensionMismatch("projector dimensions differ")
    mm = m.to_matrix()
    ss = s_perp.to_matrix()
    f = 2.0 * mm @ np.linalg.pinv(mm + ss, rcond=PINV_CUTOFF) @ ss
    return MatrixProjector(0.5 * (f + f.T))


@dataclass(frozen=True)
class HalmosDecomposition:
    """Projectors onto S∩T, S∩T^perp, S^perp∩T, S^perp∩T^perp, and the
    generic part H0 orthogonal to all four, together with their dimensions."""

    p_st: Projector
    p_st_perp: Projector
    p_sperp_t: Projector
    p_sperp_tperp: Projector
    p0: Projector
    dims: tuple = field(default=())

    def parts(self):
        return (self.p_st, self.p_st_perp, self.p_sperp_t, self.p_sperp_tperp, self.p0)


def halmos(s: SubspaceBasis, t: SubspaceBasis) -> HalmosDecomposition:
    """Five-space decomposition built from the four intersection bases plus
    the orthogonal complement of their union."""
    if s.dim != t.dim:
        raise DimensionMismatch("subspaces live in different ambient spaces")
    n = s.dim
    s_perp = s.complement()
    t_perp = t.complement()
    b_st = intersection_basis(s, t)
    b_st_perp = intersection_basis(s, t_perp)
    b_sperp_t = intersection_basis(s_perp, t)
    b_sperp_tperp = intersection_basis(s_perp, t_perp)
    stacked = np.hstack(
        [b.columns for b in (b_st, b_st_perp, b_sperp_t, b_sperp_tperp)]
    )
    b0 = complement_basis(stacked, n) if stacked.shape[1] else np.eye(n)
    dims = (b_st.k, b_st_perp.k, b_sperp_t.k, b_sperp_tperp.k, b0.shape[1])
    return HalmosDecomposition(
        p_st=BasisProjector(b_st.columns),
        p_st_perp=BasisProjector(b_st_perp.columns),
        p_sperp_t=BasisProjector(b_sperp_t.columns),
        p_sperp_tperp=BasisProjector(b_sperp_tperp.columns),
        p0=BasisProjector(b0),
        dims=dims,
    )
