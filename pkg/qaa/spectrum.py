"""
Spectrum
Lowest eigenpairs of H(s) and the minimum gap g_min over s in [0, 1].
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .config import QaaConfig
from .errors import InvalidArgumentError, NonConvergenceError
from .hamiltonian import PathOperator
from .log import get_logger

logger = get_logger(__name__)


@dataclass
class SpectrumSlice:
    s: float
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)
    residuals: Optional[np.ndarray] = None

    @property
    def gap(self):
        return float(self.eigenvalues[1] - self.eigenvalues[0])


@dataclass
class GapProfile:
    slices: List[SpectrumSlice]
    g_min: float
    s_at_min: float
    grid_points: int
    refine_iters: int
    refined: list = field(default_factory=list)

    def summary(self):
        return {"g_min": self.g_min, "s_at_min": self.s_at_min,
                "grid_points": self.grid_points, "refine_iters": self.refine_iters}


def _start_vector(dim, warm=None):
    # fixed pseudo-random start keeps ARPACK runs reproducible
    rng = np.random.default_rng(dim)
    v0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v0 /= np.linalg.norm(v0)
    if warm is not None:
        v0 = warm + 0.1 * v0
    return v0


def _residuals(op, s, eigenvalues, eigenvectors):
    return np.array([np.linalg.norm(op.apply(s, v) - lam * v)
                     for lam, v in zip(eigenvalues, eigenvectors)])


def eigenpairs_of(op, s, k=3, tol=None, v0=None):
    """
    k lowest eigenpairs of a PathOperator at s.

    s = 1 is read off the diagonal exactly (the path-change envelope vanishes
    there). Tiny dimensions are diagonalized densely; everything else uses
    ARPACK's implicitly restarted Lanczos on a matrix-free LinearOperator.
    """
    tol = QaaConfig.EIG_TOL if tol is None else tol
    if not 1 <= k <= op.dim:
        raise InvalidArgumentError(f"k={k} must lie in [1, {op.dim}]")
    PathOperator.coefficients(s)

    if s == 1.0:
        order = np.argsort(op.cost, kind="stable")[:k]
        vectors = np.zeros((k, op.dim), dtype=np.complex128)
        vectors[np.arange(k), order] = 1.0
        return SpectrumSlice(s=1.0, eigenvalues=op.cost[order].copy(), eigenvectors=vectors,
                             residuals=np.zeros(k))

    if op.dim <= QaaConfig.DENSE_SPECTRUM_DIM or k >= op.dim - 1:
        evals, evecs = scipy.linalg.eigh(op.dense(s))
        eigenvalues, eigenvectors = evals[:k], evecs[:, :k].T.copy()
    else:
        matrix = LinearOperator((op.dim, op.dim), matvec=lambda x: op.apply(s, x.ravel()),
                                dtype=np.complex128)
        ncv = min(op.dim, max(2 * k + 1, 20))
        try:
            evals, evecs = eigsh(matrix, k=k, which="SA", tol=0, ncv=ncv,
                                 v0=_start_vector(op.dim, v0), maxiter=op.dim * 10)
        except ArpackNoConvergence as exc:
            residuals = _residuals(op, s, exc.eigenvalues, exc.eigenvectors.T)
            raise NonConvergenceError(f"ARPACK did not converge at s={s}", residuals=residuals) from exc
        order = np.argsort(evals)
        eigenvalues, eigenvectors = evals[order], evecs[:, order].T.copy()

    residuals = _residuals(op, s, eigenvalues, eigenvectors)
    if residuals.max() > tol:
        raise NonConvergenceError(f"eigenpair residual {residuals.max():.2e} > {tol:.1e} at s={s}",
                                  residuals=residuals)
    return SpectrumSlice(s=float(s), eigenvalues=eigenvalues, eigenvectors=eigenvectors, residuals=residuals)


def lowest_eigenpairs(schedule, cost, s, k=3, tol=None, v0=None):
    return eigenpairs_of(PathOperator.from_schedule(schedule, cost), s, k=k, tol=tol, v0=v0)


def spectrum_scan(schedule, cost, grid_points=None, k=3, tol=None):
    """Slices on a uniform s-grid, each warm-started from its neighbour's ground state."""
    op = PathOperator.from_schedule(schedule, cost)
    grid_points = grid_points or QaaConfig.GRID_POINTS
    slices, warm = [], None
    for s in np.linspace(0.0, 1.0, int(grid_points)):
        spectrum_slice = eigenpairs_of(op, float(s), k=k, tol=tol, v0=warm)
        warm = spectrum_slice.eigenvectors[0]
        slices.append(spectrum_slice)
    logger.debug(f"spectrum scan: {len(slices)} slices, k={k}")
    return slices


def gap_scan(schedule, cost, grid_points=None, refine_iters=None, k=2, tol=None):
    """
    Gap lambda_1 - lambda_0 on a uniform grid, then a bounded golden-section/Brent
    refinement between the neighbours of the coarse minimum.
    """
    grid_points = int(grid_points or QaaConfig.GRID_POINTS)
    refine_iters = int(QaaConfig.REFINE_ITERS if refine_iters is None else refine_iters)
    if grid_points < 11:
        raise InvalidArgumentError(f"gap scan needs at least 11 grid points, got {grid_points}")

    op = PathOperator.from_schedule(schedule, cost)
    slices = spectrum_scan(schedule, cost, grid_points=grid_points, k=max(2, k), tol=tol)
    grid = np.array([sl.s for sl in slices])
    gaps = np.array([sl.gap for sl in slices])
    j = int(np.argmin(gaps))
    best_s, best_gap = grid[j], gaps[j]

    refined = []
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    if refine_iters > 0 and hi > lo:
        warm = slices[j].eigenvectors[0]

        def gap_at(s):
            gap = eigenpairs_of(op, float(s), k=2, tol=tol, v0=warm).gap
            refined.append((float(s), gap))
            return gap

        minimize_scalar(gap_at, bounds=(lo, hi), method="bounded",
                        options={"maxiter": refine_iters, "xatol": 1e-12})
        for s, gap in refined:
            if gap < best_gap:
                best_s, best_gap = s, gap

    profile = GapProfile(slices=slices, g_min=max(0.0, float(best_gap)), s_at_min=float(best_s),
                         grid_points=grid_points, refine_iters=refine_iters, refined=refined)
    logger.info(f"g_min={profile.g_min:.6e} at s={profile.s_at_min:.6f}")
    return profile
