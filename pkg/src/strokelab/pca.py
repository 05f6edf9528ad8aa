"""Principal component analysis built on a cyclic Jacobi eigensolver.

Standardization uses the sample standard deviation (ddof=1); explained
variance ratios are insensitive to that choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NotSymmetric, SchemaMismatch, ZeroVariance
from .ingest import EncodedMatrix

#: |loading| above this value counts as a strong contribution (sqrt(1/10), rounded).
STRONG_LOADING_THRESHOLD = 0.31


@dataclass(frozen=True)
class StandardizedMatrix:
    Z: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    feature_names: tuple[str, ...]


def standardize(data: EncodedMatrix) -> StandardizedMatrix:
    """Center each column and scale to unit sample standard deviation.

    Raises:
        ZeroVariance: naming the first constant column.
    """
    if data.n_rows < 2:
        raise ZeroVariance("need at least 2 rows")
    means, sigmas = _column_stats(data.X, data.feature_names)
    Z = (data.X - means) / sigmas
    return StandardizedMatrix(Z=Z, means=means, sigmas=sigmas, feature_names=data.feature_names)


def _column_stats(X: np.ndarray, names: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
    means = X.mean(axis=0)
    sigmas = X.std(axis=0, ddof=1)
    for j, s in enumerate(sigmas):
        if s == 0.0:
            raise ZeroVariance(names[j])
    return means, sigmas


def eig_sym(
    C: np.ndarray, *, tol: float = 1e-12, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns. The matrix is scaled to unit max magnitude
    internally, so ``tol`` (off-diagonal Frobenius norm at convergence) is
    scale-invariant.

    Raises:
        NotSymmetric: asymmetry above 1e-10 (relative to the matrix scale).
        NoConvergence: off-diagonal mass still above ``tol`` after
            ``max_sweeps`` sweeps.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise NotSymmetric(f"not square: {C.shape}")
    scale = float(np.abs(C).max())
    if scale == 0.0:
        return np.zeros(C.shape[0]), np.eye(C.shape[0])
    if float(np.abs(C - C.T).max()) > 1e-10 * max(1.0, scale):
        raise NotSymmetric("matrix is not symmetric within 1e-10")

    n = C.shape[0]
    A = (C + C.T) / (2.0 * scale)
    V = np.eye(n)
    off_mask = ~np.eye(n, dtype=bool)

    def off_diagonal_norm() -> float:
        # Summed directly over off-diagonal entries; the textbook
        # ||A||_F^2 - ||diag||^2 form cancels catastrophically near
        # convergence and would floor far above tol.
        return float(np.sqrt(np.sum(A[off_mask] ** 2)))

    converged = False
    for _ in range(max_sweeps):
        if off_diagonal_norm() < tol:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = A[:, p].copy()
                rot_q = A[:, q].copy()
                A[:, p] = c * rot_p - s * rot_q
                A[:, q] = s * rot_p + c * rot_q
                rot_p = A[p, :].copy()
                rot_q = A[q, :].copy()
                A[p, :] = c * rot_p - s * rot_q
                A[q, :] = s * rot_p + c * rot_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    if not converged and off_diagonal_norm() >= tol:
        raise NoConvergence(f"Jacobi sweeps exhausted ({max_sweeps})")

    eigenvalues = np.diag(A) * scale
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


@dataclass(frozen=True)
class PCAModel:
    """Eigenvalues, unit loading vectors, and the standardization parameters."""

    eigenvalues: np.ndarray
    loadings: np.ndarray  # columns are unit eigenvectors
    ratios: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray
    feature_names: tuple[str, ...]

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.ratios)

    @property
    def n_components(self) -> int:
        return len(self.eigenvalues)


def fit_pca(data: EncodedMatrix) -> PCAModel:
    """Fit PCA on the standardized matrix via sample covariance and Jacobi.

    Loading columns follow the sign convention that their largest-magnitude
    entry is positive, so tables are reproducible.
    """
    std = standardize(data)
    n = std.Z.shape[0]
    cov = (std.Z.T @ std.Z) / (n - 1)
    eigenvalues, vectors = eig_sym(cov)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    for j in range(vectors.shape[1]):
        k = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[k, j] < 0:
            vectors[:, j] = -vectors[:, j]
    total = float(eigenvalues.sum())
    ratios = eigenvalues / total if total > 0 else np.zeros_like(eigenvalues)
    return PCAModel(
        eigenvalues=eigenvalues,
        loadings=vectors,
        ratios=ratios,
        means=std.means,
        sigmas=std.sigmas,
        feature_names=data.feature_names,
    )


@dataclass(frozen=True)
class LoadingRow:
    feature: str
    pc1: float
    pc1_strong: bool
    pc2: float
    pc2_strong: bool


def loadings_report(
    model: PCAModel, threshold: float = STRONG_LOADING_THRESHOLD
) -> list[LoadingRow]:
    """Absolute PC1/PC2 loadings with strong-contribution flags."""
    rows = []
    for i, feature in enumerate(model.feature_names):
        a1 = abs(float(model.loadings[i, 0]))
        a2 = abs(float(model.loadings[i, 1]))
        rows.append(
            LoadingRow(
                feature=feature,
                pc1=a1,
                pc1_strong=a1 > threshold,
                pc2=a2,
                pc2_strong=a2 > threshold,
            )
        )
    return rows


def biplot_coords(model: PCAModel) -> list[tuple[str, float, float]]:
    """Per-feature arrow endpoints on the first two components.

    Feature i maps to (loading_i1 * sqrt(eigval_1), loading_i2 * sqrt(eigval_2)).
    """
    s1 = float(np.sqrt(model.eigenvalues[0]))
    s2 = float(np.sqrt(model.eigenvalues[1])) if model.n_components > 1 else 0.0
    return [
        (feature, float(model.loadings[i, 0]) * s1, float(model.loadings[i, 1]) * s2)
        for i, feature in enumerate(model.feature_names)
    ]


@dataclass(frozen=True)
class ScoreMatrix:
    scores: np.ndarray  # (n, k)
    cos2: np.ndarray  # (n,) quality of representation on the first two components
    labels: np.ndarray


def transform(model: PCAModel, data: EncodedMatrix, k: int) -> ScoreMatrix:
    """Project observations onto the first ``k`` components.

    Standardization uses the *model's* means and sigmas, so the projection
    of held-out data never depends on that data's own statistics. The cos2
    quality measure always refers to the first two components; an
    observation exactly at the feature means gets cos2 = 0 by convention.
    """
    if not 1 <= k <= model.n_components:
        raise ValueError(f"k must be in [1, {model.n_components}], got {k}")
    if data.feature_names != model.feature_names:
        raise SchemaMismatch(
            f"data columns {data.feature_names} != model columns {model.feature_names}"
        )
    Z = (data.X - model.means) / model.sigmas
    scores = Z @ model.loadings[:, :k]
    first_two = Z @ model.loadings[:, : min(2, model.n_components)]
    norms = np.sum(Z * Z, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos2 = np.where(norms > 0.0, np.sum(first_two**2, axis=1) / norms, 0.0)
    return ScoreMatrix(scores=scores, cos2=cos2, labels=data.y.copy())


def scree_data(model: PCAModel) -> list[tuple[int, float, float]]:
    """(component index, variance ratio, cumulative ratio) rows for plotting."""
    cum = model.cumulative()
    return [
        (i + 1, float(model.ratios[i]), float(cum[i])) for i in range(model.n_components)
    ]
