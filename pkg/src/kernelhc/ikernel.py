"""Isolation-kernel feature maps and distributional similarities.

The point kernel is data dependent: ``t`` random partitionings are drawn
from the fitting dataset, each built from ``psi`` sample points that become
hypersphere centers. A hypersphere's radius is the distance from its center
to the nearest other center in the same sample. Two points are similar in
one partitioning when they fall into the same hypersphere cell; the kernel
value is the fraction of partitionings where that happens.

Because the feature map is finite (dimension ``t * psi``), the similarity
between two point sets equals the inner product of their mean feature maps,
which is what makes set-to-set and point-to-set comparisons cheap.

Everything here is deterministic given (data, psi, t, seed) and immutable
after construction, so models and feature tables can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist, pdist

MODEL_FORMAT = "kernelhc-isolation-model"
MODEL_VERSION = 1


def _check_matrix(data: np.ndarray, name: str = "data") -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {data.shape}")
    if not np.isfinite(data).all():
        raise ValueError(f"{name} contains non-finite entries")
    return data


@dataclass(frozen=True)
class IsolationModel:
    """Fitted hypersphere partitionings.

    centers has shape (t, psi, d); radii has shape (t, psi). Every center is
    a row of the fitting dataset and its radius is the distance to its
    nearest sibling center within the same partitioning.
    """

    centers: np.ndarray
    radii: np.ndarray
    psi: int
    t: int
    seed: int

    @property
    def dim(self) -> int:
        """Dimension of the feature space, t * psi."""
        return self.t * self.psi

    @property
    def n_features_in(self) -> int:
        return self.centers.shape[2]

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Map points to cell indices, shape (n, t), int32.

        Entry (i, j) is the index of the hypersphere of partitioning j that
        covers point i, or -1 when the point's nearest center is farther
        away than that center's radius. Each point is tested only against
        its nearest center per partitioning, so cells never overlap; ties go
        to the lowest center index.
        """
        X = _check_matrix(X, "X")
        if X.shape[1] != self.n_features_in:
            raise ValueError(
                f"expected {self.n_features_in} features, got {X.shape[1]}"
            )
        n = X.shape[0]
        out = np.full((n, self.t), -1, dtype=np.int32)
        rows = np.arange(n)
        for i in range(self.t):
            d = cdist(X, self.centers[i])
            nearest = d.argmin(axis=1)
            covered = d[rows, nearest] <= self.radii[i][nearest]
            out[covered, i] = nearest[covered]
        return out

    def save(self, path) -> None:
        """Write the model to a versioned .npz file."""
        np.savez_compressed(
            path,
            format=np.array(MODEL_FORMAT),
            version=np.array(MODEL_VERSION),
            centers=self.centers,
            radii=self.radii,
            psi=np.array(self.psi),
            t=np.array(self.t),
            seed=np.array(self.seed),
        )

    @classmethod
    def load(cls, path) -> "IsolationModel":
        with np.load(path, allow_pickle=False) as f:
            if str(f["format"]) != MODEL_FORMAT:
                raise ValueError(f"not an isolation model file: {path}")
            if int(f["version"]) != MODEL_VERSION:
                raise ValueError(f"unsupported model version {int(f['version'])}")
            return cls(
                centers=f["centers"],
                radii=f["radii"],
                psi=int(f["psi"]),
                t=int(f["t"]),
                seed=int(f["seed"]),
            )


def fit_isolation_model(data: np.ndarray, psi: int, t: int, seed: int) -> IsolationModel:
    """Draw t partitionings of psi hypersphere cells each from ``data``.

    Sampling is without replacement within each partitioning. Requires
    n >= psi >= 2 (radii need at least one sibling center) and t >= 1.
    """
    data = _check_matrix(data)
    n = data.shape[0]
    if psi < 2:
        raise ValueError(f"psi must be >= 2, got {psi}")
    if psi > n:
        raise ValueError(f"psi ({psi}) cannot exceed the number of points ({n})")
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")

    rng = np.random.default_rng(seed)
    centers = np.empty((t, psi, data.shape[1]), dtype=np.float64)
    radii = np.empty((t, psi), dtype=np.float64)
    for i in range(t):
        idx = rng.choice(n, size=psi, replace=False)
        c = data[idx]
        dm = cdist(c, c)
        np.fill_diagonal(dm, np.inf)
        centers[i] = c
        radii[i] = dm.min(axis=1)
    return IsolationModel(centers=centers, radii=radii, psi=psi, t=t, seed=seed)


@dataclass(frozen=True)
class FeatureVector:
    """Sparse feature map of one point: <= t nonzeros, each 1/sqrt(t)."""

    indices: np.ndarray  # sorted flat positions in [0, dim)
    dim: int
    t: int

    @property
    def weight(self) -> float:
        return 1.0 / math.sqrt(self.t)

    @property
    def norm_sq(self) -> float:
        """Equals (#partitionings covering the point) / t, always <= 1."""
        return len(self.indices) / self.t

    def to_dense(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.indices] = self.weight
        return v


@dataclass(frozen=True)
class DistributionEmbedding:
    """Mean feature map of a point set; dense, nonnegative, norm <= 1."""

    values: np.ndarray
    support_size: int

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def embed_point(model: IsolationModel, x: np.ndarray) -> FeatureVector:
    """Feature map of a single point under the fitted partitionings."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features_in,):
        raise ValueError(
            f"expected a vector of dimension {model.n_features_in}, got shape {x.shape}"
        )
    cells = model.transform(x[None, :])[0]
    blocks = np.nonzero(cells >= 0)[0]
    flat = blocks * model.psi + cells[blocks]
    return FeatureVector(indices=flat.astype(np.int64), dim=model.dim, t=model.t)


def embed_distribution(model: IsolationModel, points: np.ndarray) -> DistributionEmbedding:
    """Kernel mean map: componentwise average of the member feature maps."""
    points = _check_matrix(points, "points")
    if points.shape[0] == 0:
        raise ValueError("cannot embed an empty point set")
    cells = model.transform(points)
    return embedding_from_cells(cells, model.psi)


def embedding_from_cells(cells: np.ndarray, psi: int) -> DistributionEmbedding:
    """Mean feature map from precomputed cell indices, shape (m, t)."""
    m, t = cells.shape
    if m == 0:
        raise ValueError("cannot embed an empty point set")
    mask = cells >= 0
    blocks = np.broadcast_to(np.arange(t), cells.shape)
    flat = (blocks * psi + cells)[mask]
    counts = np.bincount(flat, minlength=t * psi)
    values = counts / (m * math.sqrt(t))
    return DistributionEmbedding(values=values, support_size=m)


def kernel_dist_dist(a: DistributionEmbedding, b: DistributionEmbedding) -> float:
    """Similarity of two distributions: inner product of their embeddings.

    Identical (up to rounding) to the mean pairwise point-kernel value over
    the two supporting sets.
    """
    if a.dim != b.dim:
        raise ValueError(f"embedding dimensions differ: {a.dim} vs {b.dim}")
    return float(a.values @ b.values)


def kernel_point_dist(model: IsolationModel, x: np.ndarray, emb: DistributionEmbedding) -> float:
    """Similarity between a single point and a distribution embedding."""
    fv = embed_point(model, x)
    if emb.dim != fv.dim:
        raise ValueError(f"embedding dimension {emb.dim} does not match model dim {fv.dim}")
    return float(emb.values[fv.indices].sum() * fv.weight)


class IdkFeatures:
    """Per-point cell indices for a whole dataset, plus batch kernel ops.

    Stores the sparse feature maps of n points as an (n, t) int32 table
    (entry -1 = not covered). All heavy pipeline math runs through this:
    group embeddings, point-to-group similarity for every point at once,
    and pairwise point kernels.
    """

    def __init__(self, cells: np.ndarray, psi: int):
        cells = np.asarray(cells, dtype=np.int32)
        if cells.ndim != 2:
            raise ValueError("cells must be 2-D (n, t)")
        self.cells = cells
        self.psi = int(psi)

    @classmethod
    def fit(cls, model: IsolationModel, X: np.ndarray) -> "IdkFeatures":
        return cls(model.transform(X), model.psi)

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @property
    def t(self) -> int:
        return self.cells.shape[1]

    @property
    def dim(self) -> int:
        return self.t * self.psi

    def take(self, rows: np.ndarray) -> "IdkFeatures":
        return IdkFeatures(self.cells[np.asarray(rows)], self.psi)

    def mean_embedding(self, rows=None) -> DistributionEmbedding:
        cells = self.cells if rows is None else self.cells[np.asarray(rows)]
        return embedding_from_cells(cells, self.psi)

    def similarities(self, emb: DistributionEmbedding, rows=None) -> np.ndarray:
        """Point-to-distribution similarity for each stored point."""
        if emb.dim != self.dim:
            raise ValueError(f"embedding dimension {emb.dim} does not match {self.dim}")
        cells = self.cells if rows is None else self.cells[np.asarray(rows)]
        emb2d = emb.values.reshape(self.t, self.psi)
        idx = np.where(cells >= 0, cells, 0)
        vals = emb2d[np.arange(self.t)[None, :], idx]
        vals = vals * (cells >= 0)
        return vals.sum(axis=1) / math.sqrt(self.t)

    def point_kernel_row(self, i: int) -> np.ndarray:
        """Point kernel between point i and every stored point."""
        ci = self.cells[i]
        same = (self.cells == ci[None, :]) & (ci[None, :] >= 0)
        return same.sum(axis=1) / self.t

    def pairwise(self) -> np.ndarray:
        """Dense (n, n) point-kernel matrix via a sparse one-hot product."""
        mask = self.cells >= 0
        ri, ti = np.nonzero(mask)
        cols = ti * self.psi + self.cells[ri, ti]
        one_hot = sparse.csr_matrix(
            (np.ones(len(ri)), (ri, cols)), shape=(self.n, self.dim)
        )
        return np.asarray((one_hot @ one_hot.T).todense()) / self.t


# ---------------------------------------------------------------------------
# Gaussian distributional kernel (ablation reference)
# ---------------------------------------------------------------------------

def gdk_kernel(X: np.ndarray, Y: np.ndarray, bandwidth: float) -> float:
    """Exact Gaussian-RBF distributional kernel via the full double sum."""
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    X = _check_matrix(X, "X")
    Y = _check_matrix(Y, "Y")
    if X.shape[0] == 0 or Y.shape[0] == 0:
        raise ValueError("cannot compare empty point sets")
    sq = cdist(X, Y, "sqeuclidean")
    return float(np.exp(-sq / (2.0 * bandwidth**2)).mean())


def median_heuristic_bandwidth(X: np.ndarray, max_points: int = 1000, seed: int = 0) -> float:
    """Median pairwise distance, on a seeded subsample for large inputs."""
    X = _check_matrix(X, "X")
    if X.shape[0] > max_points:
        rng = np.random.default_rng(seed)
        X = X[rng.choice(X.shape[0], size=max_points, replace=False)]
    if X.shape[0] < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0


# ---------------------------------------------------------------------------
# Kernel backends
#
# The clustering pipeline only ever needs four queries; both kernels expose
# them behind the same duck-typed surface so the ablation is a constructor
# swap. A "group state" is whatever the backend caches for one cluster: the
# dense mean embedding for the isolation kernel, the member rows for the
# Gaussian one (whose feature space is infinite dimensional).
# ---------------------------------------------------------------------------

class IdkOps:
    """Isolation-kernel backend over a fixed dataset."""

    def __init__(self, feats: IdkFeatures):
        self.feats = feats

    @property
    def n(self) -> int:
        return self.feats.n

    def take(self, rows: np.ndarray) -> "IdkOps":
        return IdkOps(self.feats.take(rows))

    def group_state(self, rows: np.ndarray) -> np.ndarray:
        return self.feats.mean_embedding(rows).values

    def point_to_state(self, state: np.ndarray) -> np.ndarray:
        emb = DistributionEmbedding(values=state, support_size=0)
        return self.feats.similarities(emb)

    def point_to_set(self, rows: np.ndarray) -> np.ndarray:
        return self.point_to_state(self.group_state(rows))

    def set_similarity(self, rows_a: np.ndarray, rows_b: np.ndarray) -> float:
        return float(self.group_state(rows_a) @ self.group_state(rows_b))

    def point_row(self, i: int) -> np.ndarray:
        return self.feats.point_kernel_row(i)

    def pairwise(self) -> np.ndarray:
        return self.feats.pairwise()


class GdkOps:
    """Gaussian-kernel backend; group similarities are exact double sums."""

    def __init__(self, X: np.ndarray, bandwidth: float):
        if bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        self.X = _check_matrix(X, "X")
        self.bandwidth = float(bandwidth)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def take(self, rows: np.ndarray) -> "GdkOps":
        return GdkOps(self.X[np.asarray(rows)], self.bandwidth)

    def _rbf(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        sq = cdist(A, B, "sqeuclidean")
        return np.exp(-sq / (2.0 * self.bandwidth**2))

    def group_state(self, rows: np.ndarray) -> np.ndarray:
        return np.asarray(rows, dtype=np.int64)

    def point_to_state(self, state: np.ndarray) -> np.ndarray:
        return self._rbf(self.X, self.X[state]).mean(axis=1)

    def point_to_set(self, rows: np.ndarray) -> np.ndarray:
        return self.point_to_state(self.group_state(rows))

    def set_similarity(self, rows_a: np.ndarray, rows_b: np.ndarray) -> float:
        return float(self._rbf(self.X[np.asarray(rows_a)], self.X[np.asarray(rows_b)]).mean())

    def point_row(self, i: int) -> np.ndarray:
        return self._rbf(self.X, self.X[i][None, :])[:, 0]

    def pairwise(self) -> np.ndarray:
        return self._rbf(self.X, self.X)
