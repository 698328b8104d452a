"""Eigenvalue computations for the lumped cotangent Laplacian.

The discrete operator is the generalized pencil  K v = lambda M v  with K
the cotangent stiffness matrix and M the diagonal lumped mass matrix; its
Rayleigh quotient is the Dirichlet energy over the L^2 norm, so the
discrete eigenvalues are upper-bound-consistent with the min-max
characterization used everywhere in the bounds.

Small problems (below ``DENSE_CUTOFF`` vertices) go through dense LAPACK,
which is deterministic; larger problems use shift-invert Lanczos with a
seeded start vector.  Every solve reports relative residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import gamma

from .mesh import TriangleMesh, cotangent_stiffness

__all__ = [
    "DENSE_CUTOFF",
    "NegativeCountResult",
    "OperatorPair",
    "SolverError",
    "SpectrumResult",
    "assemble_laplacian",
    "eigensolve",
    "negative_count",
    "stability_index",
    "weyl_fit",
]

# below this many vertices, solve dense (reproducible bit-for-bit)
DENSE_CUTOFF = 1200


class SolverError(RuntimeError):
    """Eigensolver failure; carries whatever partial results converged."""

    def __init__(self, message, eigenvalues=None, eigenvectors=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors


@dataclass(frozen=True)
class OperatorPair:
    """Stiffness/mass pencil of a mesh.

    Attributes
    ----------
    stiffness : scipy.sparse.csc_matrix
        The cotangent matrix K (positive semidefinite).
    mass : scipy.sparse.dia_matrix
        Diagonal lumped mass matrix M.
    areas : numpy.ndarray
        The diagonal of M (mixed Voronoi vertex areas).
    """

    stiffness: sparse.csc_matrix
    mass: sparse.dia_matrix
    areas: np.ndarray

    @property
    def n(self) -> int:
        return self.areas.shape[0]

    def energy(self, u: np.ndarray) -> float:
        """Dirichlet energy u^T K u."""
        return float(u @ (self.stiffness @ u))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """L^2 inner product u^T M v."""
        return float(np.sum(self.areas * u * v))

    def rayleigh(self, u: np.ndarray) -> float:
        return self.energy(u) / self.inner(u, u)


def assemble_laplacian(mesh: TriangleMesh) -> OperatorPair:
    """Assemble the (K, M) pencil of a mesh."""
    K = cotangent_stiffness(mesh)
    areas = mesh.vertex_areas
    return OperatorPair(K, sparse.diags(areas), areas)


@dataclass
class SpectrumResult:
    """Sorted eigenvalues with M-orthonormal eigenvectors and diagnostics.

    ``residuals[i] = ||K v_i - lambda_i M v_i|| / ||M v_i||`` measures how
    well each pair solves the pencil.  ``zero_tol`` is the scale-aware
    threshold below which an eigenvalue counts as an exact kernel mode.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    zero_tol: float
    method: str

    @property
    def num_zero(self) -> int:
        return int(np.sum(self.eigenvalues < self.zero_tol))

    def nonzero(self) -> np.ndarray:
        """Eigenvalues with the kernel modes stripped."""
        return self.eigenvalues[self.eigenvalues >= self.zero_tol]

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0


def _residuals(K, M, lam, vecs):
    out = np.empty(lam.shape[0])
    for i in range(lam.shape[0]):
        v = vecs[:, i]
        mv = M @ v
        out[i] = np.linalg.norm(K @ v - lam[i] * mv) / np.linalg.norm(mv)
    return out


def _zero_tol(K, areas) -> float:
    # trace(K)/trace(M) is the mean Rayleigh scale of the pencil
    return 1e-8 * float(K.diagonal().sum() / areas.sum())


def eigensolve(
    mesh_or_ops: TriangleMesh | OperatorPair, count: int = 10, seed: int = 0
) -> SpectrumResult:
    """Lowest `count` eigenpairs of the Laplace pencil, ascending.

    Always includes the zero mode(s).  Dense below :data:`DENSE_CUTOFF`
    vertices, otherwise shift-invert Lanczos with a seeded deterministic
    start vector.

    Raises
    ------
    SolverError
        If the iterative solver fails to converge; partial results are
        attached to the exception.
    """
    ops = (
        mesh_or_ops
        if isinstance(mesh_or_ops, OperatorPair)
        else assemble_laplacian(mesh_or_ops)
    )
    K, M, areas = ops.stiffness, ops.mass, ops.areas
    n = ops.n
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")

    if n <= DENSE_CUTOFF:
        lam, vecs = _dense_pencil(K, areas)
        lam, vecs = lam[:count], vecs[:, :count]
        method = "dense"
    else:
        # K - sigma M is positive definite for any sigma < 0, so the
        # shift-invert factorization cannot hit the kernel of K
        sigma = -1e-2 * float(K.diagonal().sum() / areas.sum())
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        try:
            lam, vecs = eigsh(K, k=count, M=M, sigma=sigma, which="LM", v0=v0)
        except ArpackNoConvergence as exc:
            raise SolverError(
                f"ARPACK converged only {len(exc.eigenvalues)}/{count} pairs",
                eigenvalues=exc.eigenvalues,
                eigenvectors=exc.eigenvectors,
            ) from exc
        order = np.argsort(lam)
        lam, vecs = lam[order], vecs[:, order]
        method = "arpack"

    return SpectrumResult(
        eigenvalues=lam,
        eigenvectors=vecs,
        residuals=_residuals(K, M, lam, vecs),
        zero_tol=_zero_tol(K, areas),
        method=method,
    )


def _dense_pencil(K, areas, shift_diag=None):
    """Full spectrum of M^{-1/2} (K + diag(shift)) M^{-1/2}, M-orthonormal vectors."""
    w = 1.0 / np.sqrt(areas)
    A = K.toarray()
    if shift_diag is not None:
        A = A + np.diag(shift_diag)
    A = w[:, None] * A * w[None, :]
    A = 0.5 * (A + A.T)
    lam, vecs = eigh(A)
    return lam, w[:, None] * vecs


@dataclass
class NegativeCountResult:
    """Count of negative pencil eigenvalues with a boundary-mode report.

    ``count`` is the number of eigenvalues below ``-tol``; eigenvalues
    within ``[-tol, tol]`` are near-kernel modes reported separately in
    ``boundary_count`` (with ``boundary_flag`` set), never silently added
    to the count.
    """

    count: int
    boundary_count: int
    eigenvalues: np.ndarray
    tol: float
    method: str

    @property
    def boundary_flag(self) -> bool:
        return self.boundary_count > 0


def negative_count(
    mesh_or_ops: TriangleMesh | OperatorPair,
    potential,
    tol: float = 1e-9,
    seed: int = 0,
) -> NegativeCountResult:
    """Number of negative eigenvalues of the Schroedinger pencil
    (K - diag(m_i V_i)) v = lambda M v.

    `potential` is a scalar or a per-vertex array V; the operator is the
    positive Laplacian minus V.  All eigenvalues are >= -max(V), which
    bounds the shift used for the iterative path.
    """
    ops = (
        mesh_or_ops
        if isinstance(mesh_or_ops, OperatorPair)
        else assemble_laplacian(mesh_or_ops)
    )
    K, M, areas = ops.stiffness, ops.mass, ops.areas
    n = ops.n
    V = np.broadcast_to(np.asarray(potential, dtype=float), (n,))
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")

    if n <= DENSE_CUTOFF:
        lam, _ = _dense_pencil(K, areas, shift_diag=-areas * V)
        low = lam
        method = "dense"
    else:
        A = (K - sparse.diags(areas * V)).tocsc()
        sigma = -max(0.0, float(V.max())) - 1.0  # strictly below the whole spectrum
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        k = 32
        low = None
        while k < n - 1:
            try:
                lam = eigsh(
                    A, k=k, M=M, sigma=sigma, which="LM", v0=v0,
                    return_eigenvectors=False,
                )
            except ArpackNoConvergence as exc:
                raise SolverError(
                    f"ARPACK failed at k={k} while counting negative eigenvalues",
                    eigenvalues=exc.eigenvalues,
                ) from exc
            lam = np.sort(lam)
            if lam[-1] > tol:
                low = lam
                break
            k *= 2
        if low is None:
            lam_full, _ = _dense_pencil(K, areas, shift_diag=-areas * V)
            low = lam_full
        method = "arpack"

    count = int(np.sum(low < -tol))
    boundary = int(np.sum(np.abs(low) <= tol))
    return NegativeCountResult(
        count=count,
        boundary_count=boundary,
        eigenvalues=low[low <= tol],
        tol=tol,
        method=method,
    )


def stability_index(
    mesh_or_ops: TriangleMesh | OperatorPair,
    shape_squared,
    n: int = 2,
    seed: int = 0,
) -> NegativeCountResult:
    """Morse index of a minimal surface in the round sphere.

    The second variation operator is  Delta - (n + |A|^2)  acting on
    normal variations; its number of negative eigenvalues is the index.
    `shape_squared` is |A|^2, scalar or per vertex.

    Discretization scatters exact kernel eigenvalues by O(h^2), so the
    boundary band is taken proportional to the potential scale
    (0.02 * (1 + max V)) rather than at machine precision; genuine
    negative eigenvalues of the reference surfaces sit far below it.
    """
    V = n + np.asarray(shape_squared, dtype=float)
    tol = 0.02 * (1.0 + float(np.max(V)))
    return negative_count(mesh_or_ops, V, tol=tol, seed=seed)


@dataclass
class WeylFit:
    """Least-squares slope of lambda_k Vol^{2/n} against k^{2/n}."""

    slope: float
    intercept: float
    target: float
    k_range: tuple
    relative_error: float = field(init=False)

    def __post_init__(self):
        self.relative_error = abs(self.slope - self.target) / self.target


def weyl_fit(
    eigenvalues: np.ndarray,
    volume: float,
    n: int = 2,
    k_range: tuple[int, int] = (20, 60),
) -> WeylFit:
    """Fit the Weyl growth law over the index window ``k_range``.

    For an n-manifold,  lambda_k ~ C_W (k / Vol)^{2/n}  with
    C_W = 4 pi^2 / omega_n^{2/n}; the fitted slope should approach C_W
    (4 pi when n = 2).  Eigenvalues are indexed from 0 (the constant
    mode) and an intercept absorbs the low-order term.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    lo, hi = k_range
    if not 0 < lo < hi < lam.shape[0]:
        raise ValueError(f"k_range {k_range} out of bounds for {lam.shape[0]} eigenvalues")
    k = np.arange(lo, hi + 1)
    x = k ** (2.0 / n)
    y = lam[lo : hi + 1] * volume ** (2.0 / n)
    slope, intercept = np.polyfit(x, y, 1)
    omega_n = np.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)
    target = 4.0 * np.pi**2 / omega_n ** (2.0 / n)
    return WeylFit(
        slope=float(slope), intercept=float(intercept), target=float(target),
        k_range=(lo, hi),
    )
