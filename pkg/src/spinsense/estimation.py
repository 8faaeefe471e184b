"""Collective-spin statistics, signal gradients and the energy resolution.

All quantities are dimensionless: spin in units of hbar, time tau in 1/omega_dd,
field b = gamma B / omega_dd. The readout direction n is optimized in closed
form (generalized Rayleigh quotient), by default over the xy-plane.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .quantum_kernel import SpinSpecies

Z_AXIS = np.array([0.0, 0.0, 1.0])
READOUT_AXES = {"plane": (0, 1), "full": (0, 1, 2)}


@dataclass(frozen=True)
class MomentSample:
    """Per-cluster collective-spin moments; leading axes are free."""

    mean: np.ndarray  # (..., 3)
    second: np.ndarray  # (..., 3, 3), symmetrized
    grad_mean: np.ndarray | None = None

    def covariance(self):
        return self.second - self.mean[..., :, None] * self.mean[..., None, :]


def collective_moments(psi, species: SpinSpecies, n_sites: int) -> MomentSample:
    """Exact <S_a> and <(S_a S_b + S_b S_a)/2> for states ``psi`` of shape (..., D)."""
    psi = np.asarray(psi, dtype=complex)
    lead = psi.shape[:-1]
    flat = psi.reshape(-1, psi.shape[-1])
    mean, second = kernels.collective_moments(flat, species.twice_s, n_sites)
    return MomentSample(mean.reshape(lead + (3,)), second.reshape(lead + (3, 3)))


def ensemble_covariance(samples: MomentSample, n_clusters: int, mode="joint"):
    """Totals for Q independent clusters from sampled configurations.

    ``samples`` carries the configurations on axis 0. In ``joint`` mode the
    per-cluster covariance is E[second] - E[mean] E[mean]^T, which keeps the
    classical spread of cluster means; ``quantum`` averages the per-cluster
    quantum covariances instead (diagnostic only).
    """
    mean = np.asarray(samples.mean)
    if mean.shape[0] < 1:
        raise ValueError("no samples")
    e_mean = mean.mean(axis=0)
    if mode == "joint":
        gamma1 = samples.second.mean(axis=0) - np.einsum("...a,...b->...ab", e_mean, e_mean)
    elif mode == "quantum":
        gamma1 = samples.covariance().mean(axis=0)
    else:
        raise ValueError(f"unknown covariance mode {mode!r}")
    return n_clusters * e_mean, n_clusters * gamma1


def dc_gradient(mean, tau):
    """Signal gradient from the field acting as a frame rotation: tau (z x mean)."""
    mean = np.asarray(mean, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return tau[..., None] * np.cross(Z_AXIS, mean)


def central_difference(mean_plus, mean_minus, step):
    return (np.asarray(mean_plus) - np.asarray(mean_minus)) / (2.0 * step)


def richardson_discrepancy(grad_h, grad_half, floor=1e-14):
    """Relative change of a central difference when its step is halved.

    Evaluated at the point of largest gradient norm so vanishing entries
    (e.g. tau -> 0) do not dominate.
    """
    grad_h = np.asarray(grad_h)
    grad_half = np.asarray(grad_half)
    scale = np.linalg.norm(grad_h, axis=-1)
    k = np.argmax(scale) if scale.ndim else ()
    diff = np.linalg.norm(grad_h[k] - grad_half[k])
    return float(diff / max(scale[k], floor))


@dataclass(frozen=True)
class Readout:
    variance: np.ndarray  # variance of the field estimate
    direction: np.ndarray  # optimal n, unit vectors (..., 3)
    rank: np.ndarray  # numerical rank of the restricted covariance


def optimal_variance(gamma, g, readout="plane", rcond=1e-12) -> Readout:
    """min_n n.Gamma.n / (g.n)^2 over unit n in the readout subspace.

    The minimum is 1 / (g^T Gamma^+ g) with n proportional to Gamma^+ g
    (pseudo-inverse on the subspace). A vanishing gradient gives infinite
    variance.
    """
    gamma = np.asarray(gamma, dtype=float)
    g = np.asarray(g, dtype=float)
    axes = list(READOUT_AXES[readout])
    sub_gamma = gamma[..., axes, :][..., :, axes]
    sub_g = g[..., axes]
    sym = 0.5 * (sub_gamma + np.swapaxes(sub_gamma, -1, -2))
    pinv = np.linalg.pinv(sym, rcond=rcond, hermitian=True)
    rank = np.linalg.matrix_rank(sym, rtol=rcond, hermitian=True)
    x = np.einsum("...ab,...b->...a", pinv, sub_g)
    info = np.einsum("...a,...a->...", sub_g, x)
    with np.errstate(divide="ignore"):
        variance = np.where(info > 0, 1.0 / np.where(info > 0, info, 1.0), np.inf)
    direction = np.zeros(g.shape)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    direction[..., axes] = np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)
    return Readout(variance, direction, rank)


def plane_closed_form(gamma, g):
    """det of the xy block over Z, the two-dimensional readout optimum."""
    gamma = np.asarray(gamma, dtype=float)
    g = np.asarray(g, dtype=float)
    gx, gy = g[..., 0], g[..., 1]
    vx, vy, cxy = gamma[..., 0, 0], gamma[..., 1, 1], gamma[..., 0, 1]
    z = gx**2 * vy - 2 * cxy * gx * gy + gy**2 * vx
    return (vx * vy - cxy**2) / z


@dataclass(frozen=True)
class Optimum:
    tau_opt: float
    er_min: float
    index: int
    boundary: bool
    monotone: bool


def find_optimum(taus, values) -> Optimum:
    """Grid minimum refined by a parabola through the bracketing points."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    finite = np.flatnonzero(np.isfinite(values))
    if finite.size < 3:
        raise ValueError("need at least three finite curve points")
    t, v = taus[finite], values[finite]
    i = int(np.argmin(v))
    if i == 0 or i == len(v) - 1:
        diffs = np.diff(v)
        monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
        return Optimum(float(t[i]), float(v[i]), int(finite[i]), True, monotone)
    t0, t1, t2 = t[i - 1 : i + 2]
    v0, v1, v2 = v[i - 1 : i + 2]
    # Lagrange parabola through the three points
    d0 = v0 / ((t0 - t1) * (t0 - t2))
    d1 = v1 / ((t1 - t0) * (t1 - t2))
    d2 = v2 / ((t2 - t0) * (t2 - t1))
    a = d0 + d1 + d2
    b = -(d0 * (t1 + t2) + d1 * (t0 + t2) + d2 * (t0 + t1))
    c = d0 * t1 * t2 + d1 * t0 * t2 + d2 * t0 * t1
    if a <= 0:
        return Optimum(float(t1), float(v1), int(finite[i]), False, False)
    vertex = float(np.clip(-b / (2 * a), t0, t2))
    return Optimum(vertex, float(a * vertex**2 + b * vertex + c), int(finite[i]), False, False)


def jackknife_se(replicates, axis=0):
    """Delete-one-block jackknife standard error."""
    rep = np.asarray(replicates, dtype=float)
    n = rep.shape[axis]
    with np.errstate(invalid="ignore"):
        dev = rep - rep.mean(axis=axis, keepdims=True)
        return np.sqrt((n - 1) / n * np.sum(dev**2, axis=axis))


@dataclass
class MomentAccumulator:
    """Mergeable per-block sums of cluster moments.

    ``shifted`` holds sums of cluster means at finite-difference-shifted
    parameters, keyed by a label such as ``"+h"``. Sums are over clusters, so
    merging two accumulators over disjoint cluster sets is exact addition.
    """

    n_blocks: int
    n_times: int
    counts: np.ndarray = field(init=False)
    sum_mean: np.ndarray = field(init=False)
    sum_second: np.ndarray = field(init=False)
    sum_outer: np.ndarray = field(init=False)
    shifted: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.counts = np.zeros(self.n_blocks, dtype=np.int64)
        self.sum_mean = np.zeros((self.n_blocks, self.n_times, 3))
        self.sum_second = np.zeros((self.n_blocks, self.n_times, 3, 3))
        self.sum_outer = np.zeros((self.n_blocks, self.n_times, 3, 3))

    def _shifted(self, key):
        if key not in self.shifted:
            self.shifted[key] = np.zeros((self.n_blocks, self.n_times, 3))
        return self.shifted[key]

    def add(self, blocks, sample: MomentSample, shifted=None):
        """Add clusters; ``sample`` arrays are (B, T, 3) and (B, T, 3, 3)."""
        blocks = np.asarray(blocks)
        outer = np.einsum("...a,...b->...ab", sample.mean, sample.mean)
        for b in np.unique(blocks):
            sel = blocks == b
            self.counts[b] += int(sel.sum())
            self.sum_mean[b] += sample.mean[sel].sum(axis=0)
            self.sum_second[b] += sample.second[sel].sum(axis=0)
            self.sum_outer[b] += outer[sel].sum(axis=0)
            for key, means in (shifted or {}).items():
                self._shifted(key)[b] += np.asarray(means)[sel].sum(axis=0)

    def merge(self, other: "MomentAccumulator"):
        if (other.n_blocks, other.n_times) != (self.n_blocks, self.n_times):
            raise ValueError("accumulator shapes differ")
        self.counts += other.counts
        self.sum_mean += other.sum_mean
        self.sum_second += other.sum_second
        self.sum_outer += other.sum_outer
        for key, value in other.shifted.items():
            self._shifted(key)[...] += value
        return self

    def averages(self, exclude=None):
        """Per-cluster averages over all blocks, optionally leaving one out."""
        keep = np.ones(self.n_blocks, dtype=bool)
        if exclude is not None:
            keep[exclude] = False
        n = self.counts[keep].sum()
        if n == 0:
            raise ValueError("empty accumulator")
        out = {
            "count": int(n),
            "mean": self.sum_mean[keep].sum(axis=0) / n,
            "second": self.sum_second[keep].sum(axis=0) / n,
            "outer": self.sum_outer[keep].sum(axis=0) / n,
        }
        out["shifted"] = {k: v[keep].sum(axis=0) / n for k, v in self.shifted.items()}
        return out


def per_cluster_covariance(avg, mode="joint"):
    mean = avg["mean"]
    if mode == "joint":
        return avg["second"] - np.einsum("...a,...b->...ab", mean, mean)
    if mode == "quantum":
        return avg["second"] - avg["outer"]
    raise ValueError(f"unknown covariance mode {mode!r}")


@dataclass
class SensitivityCurve:
    tau: np.ndarray
    er_over_hbar: np.ndarray
    stderr: np.ndarray
    tau_opt: float
    er_min: float
    er_min_stderr: float
    tau_opt_stderr: float
    boundary: bool
    monotone: bool
