"""Restricted barycenter solvers.

The fixed commuting-coordinate slice has an exact Perron singular-vector
minimizer; common factor leaves reduce to the standard Bures-Wasserstein
barycenter on the SPD cone. A projected-gradient solve in logarithmic
coordinates serves as the independent numerical oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bures_metric import bures_distance_sq, transport_map
from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonPositiveCoordinate,
    NotOnLeaf,
    NotSimultaneouslyDiagonalizable,
)
from .kron_model import (
    FactorLeaf,
    KroneckerPoint,
    LeafKind,
    _col_scale,
    leaf_membership,
    pairwise_bures_sq_reduced,
)
from .spd_core import SpdMatrix, log_det, spd_inv_sqrt, spd_sqrt

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12


def _check_weights(weights, count: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (count,):
        raise DimensionMismatch(f"expected {count} weights, got shape {w.shape}")
    if np.any(w <= 0.0):
        raise NonPositiveCoordinate("weights must be strictly positive")
    if abs(w.sum() - 1.0) > WEIGHT_TOL * max(1.0, count):
        raise NonPositiveCoordinate(f"weights sum to {w.sum()!r}, expected 1")
    return w


@dataclass(eq=False)
class SliceData:
    """Commuting-coordinate slice data: bases, eigenvalue rows, weights.

    Row i of u_eigs and v_eigs holds the chart eigenvalues of datum i; the
    u rows carry the determinant gauge (unit product). The bases default
    to the identity for diagonal data.
    """

    u_eigs: np.ndarray
    v_eigs: np.ndarray
    weights: np.ndarray
    q_basis: np.ndarray = None
    r_basis: np.ndarray = None
    kappa: float = field(init=False)

    def __post_init__(self):
        self.u_eigs = np.asarray(self.u_eigs, dtype=float)
        self.v_eigs = np.asarray(self.v_eigs, dtype=float)
        if self.u_eigs.ndim != 2 or self.u_eigs.shape != self.v_eigs.shape:
            raise DimensionMismatch(
                f"eigenvalue arrays have shapes {self.u_eigs.shape} and "
                f"{self.v_eigs.shape}"
            )
        if np.any(self.u_eigs <= 0.0) or np.any(self.v_eigs <= 0.0):
            raise NonPositiveCoordinate("slice eigenvalues must be positive")
        count, n = self.u_eigs.shape
        drift = np.abs(np.log(self.u_eigs).sum(axis=1)).max()
        if drift > 1e-10 * max(n, 1):
            raise NonPositiveCoordinate(
                f"u eigenvalue rows drift from unit product by {drift:.6e}"
            )
        self.weights = _check_weights(self.weights, count)
        for name in ("q_basis", "r_basis"):
            basis = getattr(self, name)
            if basis is None:
                basis = np.eye(n)
            else:
                basis = np.asarray(basis, dtype=float)
                if basis.shape != (n, n):
                    raise DimensionMismatch(
                        f"{name} has shape {basis.shape}, expected {(n, n)}"
                    )
                if np.linalg.norm(basis.T @ basis - np.eye(n)) > 1e-10:
                    raise NotSimultaneouslyDiagonalizable(f"{name} is not orthogonal")
            setattr(self, name, basis)
        # Constant part of the slice objective, computed once.
        self.kappa = float(
            np.dot(self.weights, self.u_eigs.sum(axis=1) * self.v_eigs.sum(axis=1))
        )

    @property
    def n(self) -> int:
        return self.u_eigs.shape[1]

    @property
    def count(self) -> int:
        return self.u_eigs.shape[0]


def slice_data_to_json(data: SliceData) -> dict:
    """JSON-ready dict with keys n, N, weights, u_eigs, v_eigs, q_basis, r_basis."""
    return {
        "n": data.n,
        "N": data.count,
        "weights": data.weights.tolist(),
        "u_eigs": data.u_eigs.tolist(),
        "v_eigs": data.v_eigs.tolist(),
        "q_basis": data.q_basis.tolist(),
        "r_basis": data.r_basis.tolist(),
    }


def slice_data_from_json(obj: dict) -> SliceData:
    """Inverse of :func:`slice_data_to_json`; bases default to the identity."""
    data = SliceData(
        u_eigs=obj["u_eigs"],
        v_eigs=obj["v_eigs"],
        weights=obj["weights"],
        q_basis=obj.get("q_basis"),
        r_basis=obj.get("r_basis"),
    )
    if data.n != int(obj["n"]) or data.count != int(obj["N"]):
        raise DimensionMismatch(
            f"declared sizes ({obj['n']}, {obj['N']}) do not match data "
            f"({data.n}, {data.count})"
        )
    return data


@dataclass(frozen=True, eq=False)
class PerronSolution:
    """Positive top singular triple of the coefficient matrix, plus the
    gauge factor alpha = (prod u1)^(-1/n)."""

    sigma1: float
    u1: np.ndarray
    v1: np.ndarray
    alpha: float


@dataclass(frozen=True, eq=False)
class SliceBarycenter:
    """Exact slice minimizer coordinates and objective value."""

    x_star: np.ndarray
    y_star: np.ndarray
    min_value: float
    perron: PerronSolution


@dataclass(frozen=True, eq=False)
class LeafBarycenter:
    """Leafwise barycenter with the underlying factor-level solution."""

    leaf: FactorLeaf
    point: KroneckerPoint
    factor_solution: SpdMatrix


def objective_J(k, data, weights) -> float:
    """Weighted sum of squared Bures distances from k to the data.

    Uses the reduced pairwise formula when every argument is a
    KroneckerPoint; otherwise mixed inputs are embedded and evaluated in
    the ambient cone.
    """
    data = list(data)
    w = _check_weights(weights, len(data))
    all_kron = isinstance(k, KroneckerPoint) and all(
        isinstance(d, KroneckerPoint) for d in data
    )
    if all_kron:
        return float(
            sum(wi * pairwise_bures_sq_reduced(k, d)[0] for wi, d in zip(w, data))
        )
    from .kron_model import embed

    k_amb = embed(k) if isinstance(k, KroneckerPoint) else k
    total = 0.0
    for wi, d in zip(w, data):
        d_amb = embed(d) if isinstance(d, KroneckerPoint) else d
        total += wi * bures_distance_sq(k_amb, d_amb)
    return float(total)


def _check_positive(name: str, vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=float).ravel()
    if np.any(arr <= 0.0):
        raise NonPositiveCoordinate(f"{name} must be entrywise positive")
    return arr


def coefficient_matrix(data: SliceData) -> np.ndarray:
    """Entrywise positive matrix c_pq = sum_i w_i sqrt(u_ip v_iq)."""
    su = np.sqrt(data.u_eigs)
    sv = np.sqrt(data.v_eigs)
    return (su * data.weights[:, None]).T @ sv


def slice_objective(x, y, data: SliceData) -> float:
    """Barycenter objective restricted to the fixed coordinate slice."""
    x = _check_positive("x", x)
    y = _check_positive("y", y)
    if x.shape != (data.n,) or y.shape != (data.n,):
        raise DimensionMismatch(
            f"coordinate shapes {x.shape}, {y.shape} do not match n = {data.n}"
        )
    cross = float(np.sqrt(x) @ coefficient_matrix(data) @ np.sqrt(y))
    return float(x.sum() * y.sum() + data.kappa - 2.0 * cross)


def perron_singular_pair(
    c_mat, max_iter: int = 10000, tol: float = 1e-14
) -> PerronSolution:
    """Top singular triple of a positive matrix by power iteration on CC^T.

    Starts from the all-ones vector, which stays entrywise positive
    throughout; the Perron eigenvalue of CC^T is simple, so convergence is
    geometric in the singular-value gap.
    """
    c_mat = np.asarray(c_mat, dtype=float)
    if c_mat.ndim != 2 or c_mat.shape[0] != c_mat.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {c_mat.shape}")
    if np.any(c_mat <= 0.0):
        raise NonPositiveCoordinate("coefficient matrix must be entrywise positive")
    n = c_mat.shape[0]
    s_mat = c_mat @ c_mat.T
    u = np.full(n, 1.0 / np.sqrt(n))
    deltas = []
    for _ in range(max_iter):
        y = s_mat @ u
        u_new = y / np.linalg.norm(y)
        delta = float(np.max(np.abs(u_new - u)))
        u = u_new
        deltas.append(delta)
        if delta <= tol:
            break
    else:
        gap = deltas[-1] / deltas[-2] if len(deltas) > 1 and deltas[-2] > 0 else 1.0
        raise NoConvergence(
            f"power iteration stalled after {max_iter} iterations; last update "
            f"{deltas[-1]:.3e}, estimated contraction {gap:.3f}",
            best=u,
            residual=deltas[-1],
        )
    v = c_mat.T @ u
    sigma1 = float(np.linalg.norm(v))
    v1 = v / sigma1
    res = max(
        float(np.linalg.norm(c_mat @ v1 - sigma1 * u)),
        float(np.linalg.norm(c_mat.T @ u - sigma1 * v1)),
    )
    if res > 1e-10 * sigma1:
        raise NoConvergence(
            f"singular residual {res:.3e} exceeds tolerance", best=u, residual=res
        )
    alpha = float(np.exp(-np.log(u).mean()))
    return PerronSolution(sigma1=sigma1, u1=u, v1=v1, alpha=alpha)


def slice_barycenter(data: SliceData) -> SliceBarycenter:
    """Exact slice minimizer x*_p = alpha^2 u1_p^2, y*_q = sigma1^2 v1_q^2 / alpha^2."""
    perron = perron_singular_pair(coefficient_matrix(data))
    x_star = perron.alpha**2 * perron.u1**2
    y_star = (perron.sigma1**2 / perron.alpha**2) * perron.v1**2
    min_value = data.kappa - perron.sigma1**2
    return SliceBarycenter(
        x_star=x_star, y_star=y_star, min_value=min_value, perron=perron
    )


def bw_barycenter(
    mats, weights, max_iter: int = 500, fp_tol: float = 1e-10
) -> SpdMatrix:
    """Bures-Wasserstein barycenter on the SPD cone by fixed-point iteration.

    Starts at the weighted arithmetic mean and stops when the stationarity
    residual ||sum_i w_i T_{V -> V_i} - I||_F falls below fp_tol.
    """
    mats = list(mats)
    w = _check_weights(weights, len(mats))
    n = mats[0].dim
    for m in mats:
        if m.dim != n:
            raise DimensionMismatch("barycenter data have mixed dimensions")
    v = SpdMatrix(sum(wi * m.mat for wi, m in zip(w, mats)))
    eye = np.eye(n)
    prev_residual = np.inf
    best = (np.inf, v)
    for _ in range(max_iter):
        s = spd_sqrt(v).mat
        r = spd_inv_sqrt(v).mat
        g = sum(
            wi * spd_sqrt(SpdMatrix(s @ m.mat @ s)).mat for wi, m in zip(w, mats)
        )
        residual = float(np.linalg.norm(r @ g @ r - eye))
        if residual < best[0]:
            best = (residual, v)
        if residual > prev_residual:
            logger.debug(
                "barycenter residual increased from %.3e to %.3e",
                prev_residual,
                residual,
            )
        prev_residual = residual
        if residual <= fp_tol:
            return v
        half = r @ g
        v = SpdMatrix(half @ half.T)
    raise NoConvergence(
        f"fixed point not stationary after {max_iter} iterations; residual "
        f"{best[0]:.3e}",
        best=best[1],
        residual=best[0],
    )


def bw_stationarity_residual(v: SpdMatrix, mats, weights) -> float:
    """Residual ||sum_i w_i T_{V -> V_i} - I||_F of the barycenter fixed point."""
    mats = list(mats)
    w = _check_weights(weights, len(mats))
    total = sum(wi * transport_map(v, m).matrix.mat for wi, m in zip(w, mats))
    return float(np.linalg.norm(total - np.eye(v.dim)))


def leaf_barycenter(leaf: FactorLeaf, points, weights) -> LeafBarycenter:
    """Barycenter within a factor leaf via the factor-level BW barycenter."""
    points = list(points)
    w = _check_weights(weights, len(points))
    for p in points:
        if not leaf_membership(leaf, p):
            raise NotOnLeaf(f"datum is not on the {leaf.kind.value} leaf")
    if leaf.kind is LeafKind.ROW:
        v_bar = bw_barycenter([p.v_factor for p in points], w)
        point = KroneckerPoint(u_factor=leaf.anchor, v_factor=v_bar)
        return LeafBarycenter(leaf=leaf, point=point, factor_solution=v_bar)
    m_bar = bw_barycenter(
        [p.u_factor.scaled(_col_scale(leaf, p)) for p in points], w
    )
    alpha = float(np.exp(log_det(m_bar) / m_bar.dim))
    point = KroneckerPoint(
        u_factor=m_bar.scaled(1.0 / alpha), v_factor=leaf.anchor.scaled(alpha)
    )
    return LeafBarycenter(leaf=leaf, point=point, factor_solution=m_bar)


def _project_centered_box(vec: np.ndarray, bound: float) -> np.ndarray:
    """Euclidean projection onto {sum = 0} intersected with [-bound, bound]^n.

    The shift making the clipped sum vanish is found by bisection; the
    residual sum is then redistributed over the unclipped coordinates.
    """
    lo = float(vec.min()) - bound
    hi = float(vec.max()) + bound
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(vec - mid, -bound, bound).sum() > 0.0:
            lo = mid
        else:
            hi = mid
    out = np.clip(vec - 0.5 * (lo + hi), -bound, bound)
    free = np.abs(out) < bound * (1.0 - 1e-12)
    if np.any(free):
        out[free] -= out.sum() / free.sum()
    return out


def log_coordinate_oracle(
    data: SliceData,
    max_iter: int = 20000,
    grad_tol: float = 1e-8,
    bound: float = 8.0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Slice minimizer by projected gradient descent in log coordinates.

    Works in s = log x, r = log y with the linear constraint sum(s) = 0 and
    box bounds [-bound, bound], using Barzilai-Borwein steps safeguarded by
    a backtracking line search. Independent of the Perron route; returns
    (x, y, projected first-order residual). Stops early once the objective
    decrease stays below float resolution, since the line search cannot
    certify progress past that point.
    """
    c_mat = coefficient_matrix(data)
    n = data.n

    def split(z):
        return z[:n], z[n:]

    def project(z):
        s, r = split(z)
        return np.concatenate(
            [_project_centered_box(s, bound), np.clip(r, -bound, bound)]
        )

    def objective(z):
        s, r = split(z)
        x = np.exp(s)
        y = np.exp(r)
        cross = float(np.exp(0.5 * s) @ c_mat @ np.exp(0.5 * r))
        return float(x.sum() * y.sum() + data.kappa - 2.0 * cross)

    def gradient(z):
        s, r = split(z)
        x = np.exp(s)
        y = np.exp(r)
        sx = np.exp(0.5 * s)
        sy = np.exp(0.5 * r)
        gs = x * y.sum() - sx * (c_mat @ sy)
        gr = y * x.sum() - sy * (c_mat.T @ sx)
        return np.concatenate([gs, gr])

    z = project(
        np.concatenate(
            [np.log(data.u_eigs).mean(axis=0), np.log(data.v_eigs).mean(axis=0)]
        )
    )
    f = objective(z)
    g = gradient(z)
    step = 1.0
    stalled = 0
    residual = float(np.linalg.norm(z - project(z - g)))
    for _ in range(max_iter):
        if residual <= grad_tol or stalled >= 20:
            s, r = split(z)
            return np.exp(s), np.exp(r), residual
        while True:
            z_new = project(z - step * g)
            dz = z_new - z
            f_new = objective(z_new)
            if f_new <= f + float(g @ dz) + float(dz @ dz) / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-14:
                break
        g_new = gradient(z_new)
        dg = g_new - g
        curv = float(dz @ dg)
        if curv > 0.0:
            step = min(max(float(dz @ dz) / curv, 1e-12), 1e8)
        else:
            step = min(step * 2.0, 1.0)
        stalled = stalled + 1 if f - f_new <= 1e-15 * max(1.0, abs(f)) else 0
        z, f, g = z_new, f_new, g_new
        residual = float(np.linalg.norm(z - project(z - g)))
    if residual <= grad_tol:
        s, r = split(z)
        return np.exp(s), np.exp(r), residual
    raise NoConvergence(
        f"projected gradient made no further progress after {max_iter} "
        f"iterations; residual {residual:.3e}",
        best=z,
        residual=residual,
    )
