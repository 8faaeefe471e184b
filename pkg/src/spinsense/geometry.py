"""Spin-cluster geometries drawn from a unit-density Poisson point process.

Lengths are in units of rho^(-1/3). The k-th nearest neighbour of a point of
a unit-intensity PPP encloses a ball whose volume is a sum of k independent
standard exponentials, so a cluster of M spins (one at the origin plus its
M-1 nearest neighbours) is sampled exactly in O(M).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

NN_MEAN_DISTANCE = math.gamma(4 / 3) * (3 / (4 * math.pi)) ** (1 / 3)


@dataclass(frozen=True)
class ClusterGeometry:
    positions: np.ndarray  # (M, 3); row 0 is the origin

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 1:
            raise ValueError("positions must have shape (M, 3) with M >= 1")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_sites(self) -> int:
        return len(self.positions)

    def distances(self):
        """Distances of the neighbours from the origin spin."""
        return np.linalg.norm(self.positions[1:], axis=1)

    def pair_vectors(self):
        """``(pairs, r)``: unordered pairs i < j and r_ij = x_i - x_j."""
        i, j = np.triu_indices(self.n_sites, k=1)
        return np.stack([i, j], axis=1), self.positions[i] - self.positions[j]


def cluster_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for cluster ``index`` under master ``seed``."""
    return np.random.Generator(np.random.Philox(key=[int(seed) % 2**64, int(index) % 2**64]))


def _draw(n_sites, rng):
    volumes = np.cumsum(rng.standard_exponential(n_sites - 1))
    radii = np.cbrt(3.0 * volumes / (4.0 * np.pi))
    directions = rng.standard_normal((n_sites - 1, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return np.vstack([np.zeros(3), radii[:, None] * directions])


def _min_pair_distance(pos):
    i, j = np.triu_indices(len(pos), k=1)
    if i.size == 0:
        return np.inf
    return np.linalg.norm(pos[i] - pos[j], axis=1).min()


def sample_cluster(n_sites: int, rng: np.random.Generator, min_distance: float = 0.0):
    """Origin spin plus its ``n_sites - 1`` nearest PPP neighbours.

    ``min_distance`` > 0 redraws clusters containing a closer pair. It biases
    the ensemble and exists only for numerical-sensitivity studies.
    """
    if n_sites < 1:
        raise ValueError("a cluster needs at least one spin")
    while True:
        pos = _draw(n_sites, rng)
        if min_distance <= 0 or _min_pair_distance(pos) >= min_distance:
            return ClusterGeometry(pos)


def sample_clusters(n_sites, seed, indices, min_distance=0.0):
    """Positions for several clusters, shape (len(indices), M, 3)."""
    return np.stack(
        [
            sample_cluster(n_sites, cluster_stream(seed, q), min_distance).positions
            for q in indices
        ]
    )


def rescale_cluster(cluster: ClusterGeometry, lam: float) -> ClusterGeometry:
    """Map a cluster to density ``lam`` times higher: x -> lam^(-1/3) x."""
    if not lam > 0:
        raise ValueError("scale factor must be positive")
    return ClusterGeometry(cluster.positions * lam ** (-1.0 / 3.0))


def write_clusters_csv(path, positions):
    """Dump positions (Q, M, 3) as rows (cluster_index, site_index, x, y, z)."""
    positions = np.asarray(positions)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_index", "site_index", "x", "y", "z"])
        for q, cluster in enumerate(positions):
            for i, (x, y, z) in enumerate(cluster):
                writer.writerow([q, i, repr(float(x)), repr(float(y)), repr(float(z))])
