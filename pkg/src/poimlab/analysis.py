"""Separability diagnostics: standardization, 2-D PCA, k-means and cluster indices."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import DegenerateInput, KTooLarge, SingleCluster

MAX_LLOYD_ITERATIONS = 300


def _matrix(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise DegenerateInput("points must form a 2-D array")
    if not np.all(np.isfinite(X)):
        raise DegenerateInput("points must be finite")
    return X


def standardize(points) -> np.ndarray:
    """Column z-scores (population std); constant columns map to 0."""
    X = _matrix(points)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    safe = np.where(std == 0, 1.0, std)
    return np.where(std == 0, 0.0, (X - mean) / safe)


def jacobi_eigh(A, tol: float = 1e-15, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and column eigenvectors of a symmetric matrix, cyclic Jacobi.

    Eigenpairs come back sorted by descending eigenvalue; each eigenvector
    has its first nonzero entry positive.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T):
        raise DegenerateInput("matrix must be square and symmetric")
    V = np.eye(n)
    scale = np.linalg.norm(A) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if abs(theta) > 1e150:
                    t = 0.5 / theta     # theta squared would overflow
                elif theta:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                else:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                V = V @ J
    vals = np.diag(A).copy()
    order = sorted(range(n), key=lambda i: (-vals[i], i))
    vals, V = vals[order], V[:, order]
    for j in range(n):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-12)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return vals, V


@dataclass(frozen=True)
class PcaResult:
    projection: np.ndarray          # n x 2
    components: np.ndarray          # d x 2, columns are loadings
    explained_variance: np.ndarray  # all d eigenvalues, descending
    ratios: np.ndarray              # first two explained-variance ratios


def pca2(points) -> PcaResult:
    X = _matrix(points)
    n, d = X.shape
    if n < 2 or d < 2:
        raise DegenerateInput("PCA needs at least 2 points and 2 dimensions")
    Z = standardize(X)
    cov = Z.T @ Z / (n - 1)
    vals, vecs = jacobi_eigh(cov)
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total == 0:
        raise DegenerateInput("every feature is constant")
    W = vecs[:, :2]
    return PcaResult(Z @ W, W, vals, vals[:2] / total)


@dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: Tuple[float, ...]
    iterations: int


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:  # all remaining points coincide with a centre
            rest = [i for i in range(n) if i not in chosen]
            idx = rest[int(rng.integers(len(rest)))]
        chosen.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def kmeans(points, k: int, rng_seed: int, max_iter: int = MAX_LLOYD_ITERATIONS) -> KMeansResult:
    """k-means++ seeding followed by Lloyd iterations to a fixpoint."""
    X = _matrix(points)
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the {n} points")
    rng = np.random.default_rng(rng_seed)
    C = _kmeanspp(X, k, rng)
    labels = np.argmin(_sq_dists(X, C), axis=1)
    history = [float(_sq_dists(X, C)[np.arange(n), labels].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(axis=0)
        D = _sq_dists(X, C)
        new = np.argmin(D, axis=1)
        history.append(float(D[np.arange(n), new].sum()))
        if np.array_equal(new, labels):
            break
        labels = new
    return KMeansResult(labels, C, history[-1], tuple(history), it)


def _labels(assignments) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(assignments)
    uniq, inv = np.unique(a, return_inverse=True)
    if len(uniq) < 2:
        raise SingleCluster("cluster indices need at least two clusters")
    return uniq, inv


def silhouette(points, assignments) -> float:
    """Mean silhouette; points in singleton clusters score 0."""
    X = _matrix(points)
    uniq, inv = _labels(assignments)
    D = np.sqrt(np.maximum(_sq_dists(X, X), 0.0))
    k = len(uniq)
    sizes = np.bincount(inv, minlength=k)
    sums = np.stack([D[:, inv == j].sum(axis=1) for j in range(k)], axis=1)
    scores = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        own = inv[i]
        if sizes[own] == 1:
            continue
        a = sums[i, own] / (sizes[own] - 1)
        b = min(sums[i, j] / sizes[j] for j in range(k) if j != own)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def calinski_harabasz(points, assignments) -> float:
    X = _matrix(points)
    uniq, inv = _labels(assignments)
    n, k = X.shape[0], len(uniq)
    if k >= n:
        raise DegenerateInput("Calinski-Harabasz needs fewer clusters than points")
    mean = X.mean(axis=0)
    between = within = 0.0
    for j in range(k):
        members = X[inv == j]
        c = members.mean(axis=0)
        between += len(members) * float(((c - mean) ** 2).sum())
        within += float(((members - c) ** 2).sum())
    if within == 0:
        return 1.0
    return between * (n - k) / (within * (k - 1))


@dataclass
class ClusterReport:
    projected: np.ndarray
    assignments: np.ndarray
    explained_variance_ratio: Tuple[float, float]
    silhouette: float
    calinski_harabasz: float
    sizes: List[int] = field(default_factory=list)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("pc1", "pc2", "cluster"))
            for (p1, p2), c in zip(self.projected.tolist(), self.assignments.tolist()):
                w.writerow((repr(p1), repr(p2), c))

    def summary(self) -> dict:
        return {
            "explained_variance_ratio": [float(r) for r in self.explained_variance_ratio],
            "silhouette": self.silhouette,
            "calinski_harabasz": self.calinski_harabasz,
            "cluster_sizes": list(self.sizes),
        }


def cluster_report(points, k: int = 3, rng_seed: int = 0) -> ClusterReport:
    """Standardize, project to two components, cluster the projection, score it."""
    pca = pca2(points)
    km = kmeans(pca.projection, k, rng_seed)
    return ClusterReport(
        projected=pca.projection,
        assignments=km.assignments,
        explained_variance_ratio=(float(pca.ratios[0]), float(pca.ratios[1])),
        silhouette=silhouette(pca.projection, km.assignments),
        calinski_harabasz=calinski_harabasz(pca.projection, km.assignments),
        sizes=np.bincount(km.assignments, minlength=k).tolist(),
    )


def feature_matrix(records: Sequence) -> np.ndarray:
    """Raw feature rows from transaction records."""
    return np.array([r.features() for r in records], dtype=float)
