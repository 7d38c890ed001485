"""Geodesic-closure diagnostics for the Kronecker model.

Fixed commuting charts and their square-root profiles, the departure
moduli with closed forms, the partial-trace residual projection, whitened
initial velocities, endpoint tangency and rigidity classification, the
2x2 pattern test, and the isotropic pullback metric.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bures_metric import COMMUTE_TOL, transport_map
from .errors import (
    DimensionMismatch,
    GaugeViolation,
    InconsistentVerdict,
    NonPositiveCoordinate,
    NotSimultaneouslyDiagonalizable,
    NumericalConsistencyError,
    ParameterOutOfRange,
    TraceNotZero,
)
from .kron_model import KroneckerPoint
from .spd_core import (
    SpdMatrix,
    kron,
    partial_trace_1,
    partial_trace_2,
    spd_inv_sqrt,
    spd_sqrt,
    symmetrize,
)

# Thresholds for rank-one, residual, and 2x2 pattern checks. The leaf vs
# generic gap is many orders of magnitude, so any value in [1e-12, 1e-6]
# classifies identically.
RANK_TOL = 1e-10
RESIDUAL_TOL = 1e-10
PATTERN_TOL = 1e-10

# Off-diagonal mass allowed when verifying a joint eigenbasis.
CHART_TOL = 1e-8

_EIG_GROUP_TOL = 1e-8
_PROFILE_GAUGE_TOL = 1e-8


class ClosureVerdict(Enum):
    ALWAYS_IN_MODEL_ROW_LEAF = "always_in_model_row_leaf"
    ALWAYS_IN_MODEL_COL_LEAF = "always_in_model_col_leaf"
    DEPARTS_IMMEDIATELY = "departs_immediately"


class RigidityVerdict(Enum):
    COMMON_ROW_LEAF = "common_row_leaf"
    COMMON_COL_LEAF = "common_col_leaf"
    DEPARTS = "departs"


@dataclass(frozen=True, eq=False)
class CommutingChart:
    """Joint diagonalizing bases and eigenvalue vectors for a commuting pair.

    Q diagonalizes both U factors, R both V factors, and the U eigenvalue
    rows carry the determinant gauge (unit product).
    """

    q_basis: np.ndarray
    r_basis: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    v0: np.ndarray
    v1: np.ndarray

    def __post_init__(self):
        n = self.u0.shape[0]
        for name, basis in (("q_basis", self.q_basis), ("r_basis", self.r_basis)):
            if basis.shape != (n, n):
                raise DimensionMismatch(f"{name} has shape {basis.shape}, expected {(n, n)}")
            defect = np.linalg.norm(basis.T @ basis - np.eye(n))
            if defect > 1e-10:
                raise NotSimultaneouslyDiagonalizable(
                    f"{name} is not orthogonal: defect {defect:.6e}"
                )
        for name, vals in (("u0", self.u0), ("u1", self.u1), ("v0", self.v0), ("v1", self.v1)):
            if np.any(vals <= 0.0):
                raise NonPositiveCoordinate(f"{name} has nonpositive eigenvalues")
        for name, vals in (("u0", self.u0), ("u1", self.u1)):
            drift = abs(float(np.log(vals).sum()))
            if drift > 1e-10 * n:
                raise GaugeViolation(f"{name} eigenvalue product drifts by {drift:.6e}")

    @property
    def n(self) -> int:
        return self.u0.shape[0]


@dataclass(frozen=True, eq=False)
class SqrtProfile:
    """Square-root vectors a, b, c, d of the chart eigenvalues.

    The interpolant H_t = (1-t) a b^T + t c d^T collects the square roots
    of the commuting geodesic's diagonal entries.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        n = self.a.shape[0]
        for name, vec in (("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)):
            if vec.shape != (n,):
                raise DimensionMismatch(f"{name} has shape {vec.shape}, expected {(n,)}")
            if np.any(vec <= 0.0):
                raise NonPositiveCoordinate(f"profile vector {name} must be positive")
        for name, vec in (("a", self.a), ("c", self.c)):
            drift = abs(float(np.log(vec).sum()))
            if drift > _PROFILE_GAUGE_TOL * max(n, 1):
                raise GaugeViolation(
                    f"profile vector {name} has log-product drift {drift:.6e}"
                )

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @classmethod
    def from_chart(cls, chart: CommutingChart) -> "SqrtProfile":
        return cls(
            a=np.sqrt(chart.u0),
            b=np.sqrt(chart.v0),
            c=np.sqrt(chart.u1),
            d=np.sqrt(chart.v1),
        )


@dataclass(frozen=True, eq=False)
class DepartureCoefficients:
    """Norms and inner products of the profile vectors.

    A = |a|^2, C = |c|^2, rho = <a, c>, B = |b|^2, D = |d|^2, sigma = <b, d>.
    """

    A: float
    B: float
    C: float
    D: float
    rho: float
    sigma: float

    def __post_init__(self):
        for name, val in (("A", self.A), ("B", self.B), ("C", self.C), ("D", self.D)):
            if val <= 0.0:
                raise NonPositiveCoordinate(f"coefficient {name} must be positive")
        # Cauchy-Schwarz, with slack for round-off on collinear profiles.
        if self.rho**2 > self.A * self.C * (1.0 + 1e-9):
            raise NumericalConsistencyError("rho^2 exceeds A*C beyond round-off")
        if self.sigma**2 > self.B * self.D * (1.0 + 1e-9):
            raise NumericalConsistencyError("sigma^2 exceeds B*D beyond round-off")

    @classmethod
    def from_profile(cls, profile: SqrtProfile) -> "DepartureCoefficients":
        return cls(
            A=float(np.dot(profile.a, profile.a)),
            B=float(np.dot(profile.b, profile.b)),
            C=float(np.dot(profile.c, profile.c)),
            D=float(np.dot(profile.d, profile.d)),
            rho=float(np.dot(profile.a, profile.c)),
            sigma=float(np.dot(profile.b, profile.d)),
        )


@dataclass(frozen=True, eq=False)
class FactorTransports:
    """Factor Bures transports and their whitened similarity images.

    P = V0^-1/2 S_V V0^1/2 and Q = U0^-1/2 S_U U0^1/2 share the spectra of
    S_V and S_U; the ambient transport factorizes as S_V (x) S_U.
    """

    s_u: SpdMatrix
    s_v: SpdMatrix
    p_mat: np.ndarray
    q_mat: np.ndarray


@dataclass(frozen=True, eq=False)
class TangencyReport:
    """Whitened initial velocity, its partial-trace residual, and the verdict."""

    z0: np.ndarray
    residual: np.ndarray
    residual_norm: float
    verdict: RigidityVerdict


def _check_commuting(a: np.ndarray, b: np.ndarray, label: str, tol: float) -> None:
    comm = np.linalg.norm(a @ b - b @ a)
    scale = np.linalg.norm(a) * np.linalg.norm(b)
    if comm > tol * scale:
        raise NotSimultaneouslyDiagonalizable(
            f"{label} factors do not commute: relative commutator "
            f"{comm / scale:.6e}"
        )


def _joint_eigenbasis(a: SpdMatrix, b_mat: np.ndarray) -> np.ndarray:
    """Orthogonal basis diagonalizing A and, within its eigenspaces, B.

    Eigenvalues of A are taken descending; ties are broken by descending
    eigenvalue of B inside each repeated-eigenvalue group.
    """
    w = a.eig.eigenvalues
    q = a.eig.eigenvectors.copy()
    gap = _EIG_GROUP_TOL * max(w[0], np.finfo(float).tiny)
    start = 0
    for stop in range(1, len(w) + 1):
        if stop < len(w) and w[start] - w[stop] <= gap:
            continue
        if stop - start > 1:
            qg = q[:, start:stop]
            _, qb = np.linalg.eigh(symmetrize(qg.T @ b_mat @ qg))
            q[:, start:stop] = qg @ qb[:, ::-1]
        start = stop
    return q


def _diagonalize_pair(
    a0: SpdMatrix, a1: SpdMatrix, label: str, chart_tol: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    basis = _joint_eigenbasis(a0, a1.mat)
    vals = []
    for m in (a0.mat, a1.mat):
        rotated = basis.T @ m @ basis
        diag = np.diag(rotated).copy()
        off = np.linalg.norm(rotated - np.diag(diag))
        if off > chart_tol * np.linalg.norm(m):
            raise NotSimultaneouslyDiagonalizable(
                f"{label} factors have off-diagonal mass {off:.6e} in the joint basis"
            )
        vals.append(diag)
    return basis, vals[0], vals[1]


def build_chart(
    p0: KroneckerPoint,
    p1: KroneckerPoint,
    commute_tol: float = COMMUTE_TOL,
    chart_tol: float = CHART_TOL,
) -> CommutingChart:
    """Joint diagonalizing chart for simultaneously diagonalizable endpoints."""
    if p0.n != p1.n:
        raise DimensionMismatch(f"factor dimensions differ: {p0.n} vs {p1.n}")
    _check_commuting(p0.u_factor.mat, p1.u_factor.mat, "U", commute_tol)
    _check_commuting(p0.v_factor.mat, p1.v_factor.mat, "V", commute_tol)
    q, u0, u1 = _diagonalize_pair(p0.u_factor, p1.u_factor, "U", chart_tol)
    r, v0, v1 = _diagonalize_pair(p0.v_factor, p1.v_factor, "V", chart_tol)
    return CommutingChart(q_basis=q, r_basis=r, u0=u0, u1=u1, v0=v0, v1=v1)


def profile_matrix(profile: SqrtProfile, t: float) -> np.ndarray:
    """Interpolant H_t = (1-t) a b^T + t c d^T."""
    return (1.0 - t) * np.outer(profile.a, profile.b) + t * np.outer(
        profile.c, profile.d
    )


def sqrt_profile_at(chart: CommutingChart, t: float) -> np.ndarray:
    """Square-root profile H_t of the commuting geodesic in the chart basis.

    The entrywise squares of H_t are the geodesic's diagonal entries in the
    basis R (x) Q; H_t has rank one exactly when the geodesic point stays
    in the model.
    """
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"profile parameter {t} outside [0, 1]")
    return profile_matrix(SqrtProfile.from_chart(chart), t)


def classify_closure_commuting(
    chart: CommutingChart, rank_tol: float = RANK_TOL
) -> ClosureVerdict:
    """Fixed-chart closure verdict from the eigenvalue vectors.

    Row leaf iff the U eigenvalues agree entrywise, column leaf iff the V
    eigenvalues are positively proportional; anything else departs the
    model immediately.
    """
    if np.max(np.abs(chart.u1 - chart.u0)) <= rank_tol * np.max(chart.u0):
        return ClosureVerdict.ALWAYS_IN_MODEL_ROW_LEAF
    tau = float(np.dot(chart.v0, chart.v1) / np.dot(chart.v0, chart.v0))
    if tau > 0.0 and np.max(np.abs(chart.v1 - tau * chart.v0)) <= rank_tol * np.max(
        chart.v1
    ):
        return ClosureVerdict.ALWAYS_IN_MODEL_COL_LEAF
    return ClosureVerdict.DEPARTS_IMMEDIATELY


def _collinearity_defects(coeffs: DepartureCoefficients) -> tuple[float, float]:
    # Exact zeros here are meaningful: bitwise-equal leaf profiles cancel
    # exactly, which makes the moduli vanish identically on leaves.
    du = max(coeffs.A * coeffs.C - coeffs.rho * coeffs.rho, 0.0)
    dv = max(coeffs.B * coeffs.D - coeffs.sigma * coeffs.sigma, 0.0)
    return du, dv


def delta_geo_closed_form(coeffs: DepartureCoefficients, t: float) -> float:
    """Square-root departure modulus sigma_2(H_t) in closed form."""
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"modulus parameter {t} outside [0, 1]")
    du, dv = _collinearity_defects(coeffs)
    big_t = (
        (1.0 - t) ** 2 * coeffs.A * coeffs.B
        + 2.0 * t * (1.0 - t) * coeffs.rho * coeffs.sigma
        + t * t * coeffs.C * coeffs.D
    )
    delta = t * t * (1.0 - t) ** 2 * du * dv
    rad = big_t * big_t - 4.0 * delta
    if rad < 0.0:
        if rad < -1e-12 * big_t * big_t:
            raise NumericalConsistencyError(
                f"discriminant {rad:.6e} negative beyond round-off"
            )
        rad = 0.0
    # Smaller quadratic root in product form: no cancellation for small
    # Delta and an exact zero whenever a collinearity defect vanishes.
    denom = big_t + np.sqrt(rad)
    if denom <= 0.0:
        return 0.0
    return float(np.sqrt(2.0 * delta / denom))


def delta_geo_svd(h: np.ndarray) -> float:
    """Second singular value of the profile; oracle for the closed form."""
    h = np.asarray(h, dtype=float)
    if min(h.shape) < 2:
        return 0.0
    return float(np.linalg.svd(h, compute_uv=False)[1])


def delta_geo_asymptote(coeffs: DepartureCoefficients) -> float:
    """Quadratic coefficient of delta_geo(t)^2 = coeff * t^2 + O(t^3)."""
    du, dv = _collinearity_defects(coeffs)
    return du * dv / (coeffs.A * coeffs.B)


def delta_diag(profile: SqrtProfile, t: float) -> float:
    """Diagonal-profile departure modulus via the 3x3 Gram spectrum.

    M_t = H_t o H_t factors as P_t Q_t^T with three columns each, so the
    singular-value tail reduces to the two trailing eigenvalues of the 3x3
    matrix (P_t^T P_t)^1/2 (Q_t^T Q_t) (P_t^T P_t)^1/2.
    """
    if not 0.0 <= t <= 1.0:
        raise ParameterOutOfRange(f"modulus parameter {t} outside [0, 1]")
    du, dv = _collinearity_defects(DepartureCoefficients.from_profile(profile))
    if du == 0.0 or dv == 0.0:
        # Collinear profile vectors make H_t rank one for every t.
        return 0.0
    a, b, c, d = profile.a, profile.b, profile.c, profile.d
    s_mid = np.sqrt(2.0 * t * (1.0 - t))
    p_cols = np.column_stack(((1.0 - t) * a * a, s_mid * a * c, t * c * c))
    q_cols = np.column_stack(((1.0 - t) * b * b, s_mid * b * d, t * d * d))
    gram_p = p_cols.T @ p_cols
    gram_q = q_cols.T @ q_cols
    # Regularize before the square root so a singular Gram stays harmless.
    eps = 1e-14 * float(np.trace(gram_p))
    wp, qp = np.linalg.eigh(gram_p + eps * np.eye(3))
    root = (qp * np.sqrt(np.clip(wp, 0.0, None))) @ qp.T
    gamma = symmetrize(root @ gram_q @ root)
    w = np.linalg.eigvalsh(gamma)
    tail = max(w[0], 0.0) + max(w[1], 0.0)
    return float(np.sqrt(tail))


def pi_residual(z, n: int) -> np.ndarray:
    """Partial-trace residual, the projection away from Kronecker sums.

    Pi(Z) = Z - (1/n) I (x) tr1(Z) - (1/n) tr2(Z) (x) I + tr(Z)/n^2 I.
    Both partial traces of the result vanish, and the kernel is exactly
    the Kronecker-sum space {I (x) A + B (x) I}.
    """
    z = symmetrize(z)
    if z.shape != (n * n, n * n):
        raise DimensionMismatch(
            f"expected a {n * n} x {n * n} matrix, got shape {z.shape}"
        )
    t1 = partial_trace_1(z, n)
    t2 = partial_trace_2(z, n)
    eye = np.eye(n)
    out = z - kron(eye, t1) / n - kron(t2, eye) / n
    out[np.diag_indices_from(out)] += np.trace(z) / n**2
    return out


def factor_transports(p0: KroneckerPoint, p1: KroneckerPoint) -> FactorTransports:
    """Factor Bures transports S_U, S_V and the whitened maps P, Q."""
    if p0.n != p1.n:
        raise DimensionMismatch(f"factor dimensions differ: {p0.n} vs {p1.n}")
    s_v = transport_map(p0.v_factor, p1.v_factor).matrix
    s_u = transport_map(p0.u_factor, p1.u_factor).matrix
    v_isqrt = spd_inv_sqrt(p0.v_factor).mat
    v_sqrt = spd_sqrt(p0.v_factor).mat
    u_isqrt = spd_inv_sqrt(p0.u_factor).mat
    u_sqrt = spd_sqrt(p0.u_factor).mat
    return FactorTransports(
        s_u=s_u,
        s_v=s_v,
        p_mat=v_isqrt @ s_v.mat @ v_sqrt,
        q_mat=u_isqrt @ s_u.mat @ u_sqrt,
    )


def whitened_initial_velocity(ft: FactorTransports) -> np.ndarray:
    """Whitened initial velocity Z0 = P (x) Q + P^T (x) Q^T - 2I."""
    m = kron(ft.p_mat, ft.q_mat)
    z0 = m + m.T
    z0[np.diag_indices_from(z0)] -= 2.0
    return z0


def endpoint_rigidity_classify(
    p0: KroneckerPoint, p1: KroneckerPoint, residual_tol: float = RESIDUAL_TOL
) -> TangencyReport:
    """Classify an endpoint pair by the partial-trace residual of Z0.

    The verdict comes from direct factor comparisons; the report asserts
    the rigidity equivalence, so a small residual must coincide with a
    common-leaf verdict. Disagreement raises InconsistentVerdict.
    """
    ft = factor_transports(p0, p1)
    z0 = whitened_initial_velocity(ft)
    residual = pi_residual(z0, p0.n)
    residual_norm = float(np.linalg.norm(residual))

    u0, u1 = p0.u_factor.mat, p1.u_factor.mat
    v0, v1 = p0.v_factor.mat, p1.v_factor.mat
    if np.linalg.norm(u1 - u0) <= residual_tol * np.linalg.norm(u0):
        verdict = RigidityVerdict.COMMON_ROW_LEAF
    else:
        tau = float(np.sum(v1 * v0) / np.sum(v0 * v0))
        if tau > 0.0 and np.linalg.norm(v1 - tau * v0) <= residual_tol * np.linalg.norm(
            v1
        ):
            verdict = RigidityVerdict.COMMON_COL_LEAF
        else:
            verdict = RigidityVerdict.DEPARTS

    on_leaf = verdict is not RigidityVerdict.DEPARTS
    if on_leaf != (residual_norm <= residual_tol):
        raise InconsistentVerdict(
            f"factor verdict {verdict.value} conflicts with residual norm "
            f"{residual_norm:.6e} at tolerance {residual_tol:.1e}"
        )
    return TangencyReport(
        z0=z0, residual=residual, residual_norm=residual_norm, verdict=verdict
    )


_PATTERN_RELATIONS = (
    ("z14=0", lambda z: abs(z[0, 3])),
    ("z23=0", lambda z: abs(z[1, 2])),
    ("z12=z34", lambda z: abs(z[0, 1] - z[2, 3])),
    ("z13=z24", lambda z: abs(z[0, 2] - z[1, 3])),
    ("z11-z22=z33-z44", lambda z: abs((z[0, 0] - z[1, 1]) - (z[2, 2] - z[3, 3]))),
)


def pattern_2x2_check(
    z0, pattern_tol: float = PATTERN_TOL
) -> tuple[bool, list[str]]:
    """Entrywise tangency relations for n = 2.

    Returns whether all relations hold and the list of violated ones;
    agreement with the residual test is exact up to tolerances.
    """
    z0 = symmetrize(z0)
    if z0.shape != (4, 4):
        raise DimensionMismatch(f"expected a 4 x 4 matrix, got shape {z0.shape}")
    scale = max(1.0, float(np.linalg.norm(z0)))
    violated = [
        name for name, gap in _PATTERN_RELATIONS if gap(z0) > pattern_tol * scale
    ]
    return not violated, violated


def pullback_metric_isotropic(n: int, s: float, h_u, h_v) -> float:
    """Pullback metric (n/4)(s |H_U|^2 + |H_V|^2 / s) at the point (I, sI).

    H_U must be trace-free, matching the tangent space of the
    determinant-normalized factor.
    """
    if s <= 0.0:
        raise ParameterOutOfRange(f"isotropic scale must be positive, got {s}")
    h_u = symmetrize(h_u)
    h_v = symmetrize(h_v)
    if h_u.shape != (n, n) or h_v.shape != (n, n):
        raise DimensionMismatch(
            f"tangent shapes {h_u.shape}, {h_v.shape} do not match n = {n}"
        )
    norm_u = float(np.linalg.norm(h_u))
    if abs(float(np.trace(h_u))) > 1e-12 * max(norm_u, np.finfo(float).tiny):
        raise TraceNotZero(f"tr(H_U) = {np.trace(h_u):.6e} is not zero")
    norm_v = float(np.linalg.norm(h_v))
    return 0.25 * n * (s * norm_u**2 + norm_v**2 / s)


def departure_profile_rows(profile: SqrtProfile, ts=None):
    """Yield (t, delta_geo, delta_diag) records over a t grid."""
    if ts is None:
        ts = np.linspace(0.0, 1.0, 201)
    coeffs = DepartureCoefficients.from_profile(profile)
    for t in ts:
        t = float(t)
        yield t, delta_geo_closed_form(coeffs, t), delta_diag(profile, t)


def write_departure_profile(path, profile: SqrtProfile, ts=None) -> None:
    """Write the per-t departure profile as CSV columns (t, delta_geo, delta_diag)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "delta_geo", "delta_diag"])
        for t, dgeo, ddiag in departure_profile_rows(profile, ts):
            writer.writerow([repr(t), repr(dgeo), repr(ddiag)])
