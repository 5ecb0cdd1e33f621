"""
Equal-area sphere partitions, one-dimensional laws and distances, state
fingerprints and the Aizenman-Wehr direction density.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import optimize, special
from scipy.spatial.distance import pdist

from .basis import angles_to_sphere
from .errors import (
    DimensionMismatchError,
    EmptySampleError,
    InvalidCovarianceError,
    ParamagneticError,
    ParameterError,
    ZeroReferenceError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
DEFAULT_WINDOW = 16


@dataclass(frozen=True, eq=False)
class EmpiricalLaw1D:
    """
    A law on the real line given by sorted atoms and optional weights;
    without weights every atom carries mass 1/count.
    """
    values: np.ndarray
    weights: Optional[np.ndarray] = None

    @classmethod
    def from_samples(cls, samples, weights=None, support=None):
        samples = np.asarray(samples, dtype=float).ravel()
        if not samples.size:
            raise EmptySampleError('empirical law needs at least one value')
        if support is not None:
            low, high = support
            if samples.min() < low or samples.max() > high:
                raise ParameterError('values outside the support [{}, {}]'
                                     .format(low, high))
        order = np.argsort(samples, kind='stable')
        if weights is None:
            return cls(samples[order])
        weights = np.asarray(weights, dtype=float).ravel()[order]
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ParameterError('weights must be nonnegative, not all zero')
        return cls(samples[order], weights / weights.sum())

    @property
    def count(self):
        return self.values.shape[0]

    @property
    def probabilities(self):
        if self.weights is None:
            return np.full(self.count, 1 / self.count)
        return self.weights

    @property
    def mean(self):
        return float(self.probabilities @ self.values)

    @property
    def std(self):
        centered = self.values - self.mean
        return float(np.sqrt(self.probabilities @ centered**2))

    def cdf(self, t):
        cumulative = np.concatenate([[0.0], np.cumsum(self.probabilities)])
        return cumulative[np.searchsorted(self.values, t, side='right')]

    def merge(self, other):
        """
        Pool two unweighted samples.
        """
        if self.weights is not None or other.weights is not None:
            raise ParameterError('only unweighted laws can be merged')
        merged = np.concatenate([self.values, other.values])
        return EmpiricalLaw1D(np.sort(merged, kind='mergesort'))


def bl_distance_1d(a, b):
    """
    Bounded-Lipschitz surrogate between two laws on the line.

    This is the 1-Wasserstein distance, computed exactly as the integral of
    |F_a - F_b| (the cost of the quantile coupling), capped at 2.  For laws
    on an interval of length at most 2 it equals the supremum over
    1-Lipschitz test functions and bounds the BL distance from above.
    """
    if not a.count or not b.count:
        raise EmptySampleError('distance needs two non-empty laws')
    grid = np.union1d(a.values, b.values)
    gaps = np.diff(grid)
    difference = np.abs(a.cdf(grid[:-1]) - b.cdf(grid[:-1]))
    return float(min(difference @ gaps, 2.0))


@dataclass(frozen=True)
class Cell:
    index: int
    theta: Tuple[float, float]
    phi: Tuple[float, float]


@dataclass(frozen=True, eq=False)
class SpherePartition:
    """
    Zonal equal-area partition of S^1 or S^2.

    Cells are rectangles in angle coordinates grouped into bands of
    colatitude; on S^1 there is a single band and only the azimuth matters.
    Points on S^2 are parametrized as (cos t, sin t cos p, sin t sin p),
    matching `basis.angles_to_sphere`.
    """
    sphere_dim: int
    theta_edges: np.ndarray
    band_counts: np.ndarray

    @property
    def d(self):
        return self.sphere_dim + 1

    @property
    def count(self):
        return int(self.band_counts.sum())

    @property
    def cells(self) -> List[Cell]:
        cells = []
        for band, m in enumerate(self.band_counts):
            theta = (self.theta_edges[band], self.theta_edges[band + 1])
            for k in range(m):
                phi = (TWO_PI * k / m, TWO_PI * (k + 1) / m)
                cells.append(Cell(len(cells), theta, phi))
        return cells

    def band_of(self, index):
        return int(np.searchsorted(np.cumsum(self.band_counts), index,
                                   side='right'))

    def point(self, theta, phi):
        if self.sphere_dim == 1:
            return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return angles_to_sphere(np.stack(np.broadcast_arrays(theta, phi),
                                         axis=-1))

    @property
    def representatives(self):
        """
        Angular centroids; the caps of S^2 are represented by their poles.
        """
        points = []
        for cell in self.cells:
            theta = 0.5 * sum(cell.theta)
            if self.sphere_dim == 2 and cell.theta[0] == 0:
                theta = 0.0
            elif self.sphere_dim == 2 and cell.theta[1] == np.pi:
                theta = np.pi
            points.append(self.point(theta, 0.5 * sum(cell.phi)))
        return np.array(points)

    @property
    def areas(self):
        areas = []
        for cell in self.cells:
            width = cell.phi[1] - cell.phi[0]
            if self.sphere_dim == 1:
                areas.append(width)
            else:
                areas.append(width *
                             (np.cos(cell.theta[0]) - np.cos(cell.theta[1])))
        return np.array(areas)

    def locate(self, omega):
        """
        Cell index of each unit vector; points on shared boundaries go to the
        lowest index.
        """
        omega = np.atleast_2d(omega)
        if self.sphere_dim == 1:
            band = np.zeros(omega.shape[0], dtype=int)
            phi = np.mod(np.arctan2(omega[:, 1], omega[:, 0]), TWO_PI)
        else:
            theta = np.arctan2(np.linalg.norm(omega[:, 1:], axis=1),
                               omega[:, 0])
            band = np.searchsorted(self.theta_edges[1:-1], theta, side='left')
            phi = np.mod(np.arctan2(omega[:, 2], omega[:, 1]), TWO_PI)
        m = self.band_counts[band]
        k = np.clip(np.ceil(phi * m / TWO_PI).astype(int) - 1, 0, m - 1)
        offsets = np.concatenate([[0], np.cumsum(self.band_counts)[:-1]])
        return offsets[band] + k

    def adjacent(self, a, b):
        """
        Whether the closures of cells `a` and `b` intersect (a cell counts as
        adjacent to itself).
        """
        if a == b:
            return True
        cells = self.cells
        ca, cb = cells[a], cells[b]
        band_a, band_b = self.band_of(a), self.band_of(b)
        if abs(band_a - band_b) > 1:
            return False
        low = max(ca.phi[0], cb.phi[0])
        high = min(ca.phi[1], cb.phi[1])
        eps = 1e-12
        wraps = (np.isclose(ca.phi[0], 0) and np.isclose(cb.phi[1], TWO_PI)) \
            or (np.isclose(cb.phi[0], 0) and np.isclose(ca.phi[1], TWO_PI))
        return bool(low <= high + eps or wraps)

    def diameters(self, samples=64):
        """
        Euclidean cell diameters measured on densely sampled cell boundaries.
        """
        result = []
        s = np.linspace(0, 1, samples)
        for cell in self.cells:
            p0, p1 = cell.phi
            t0, t1 = cell.theta
            if self.sphere_dim == 1:
                boundary = self.point(None, p0 + (p1 - p0) * s)
            else:
                edges = [
                    (np.full(samples, t0), p0 + (p1 - p0) * s),
                    (np.full(samples, t1), p0 + (p1 - p0) * s),
                    (t0 + (t1 - t0) * s, np.full(samples, p0)),
                    (t0 + (t1 - t0) * s, np.full(samples, p1)),
                ]
                boundary = np.concatenate(
                    [self.point(t, p) for t, p in edges])
            result.append(pdist(boundary).max())
        return np.array(result)

    def as_dict(self):
        return {
            'sphere_dim': self.sphere_dim,
            'cells': [{
                'index': c.index,
                'theta': list(c.theta),
                'phi': list(c.phi),
            } for c in self.cells],
            'representatives': self.representatives.tolist(),
        }


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def eq_partition(sphere_dim, N):
    """
    Recursive zonal equal-area partition EQ(sphere_dim, N) for sphere_dim
    in {1, 2}.

    On S^2: two polar caps of area 4 pi / N, then collars of nearly equal
    angular height, each collar receiving the rounded ideal number of cells
    with the rounding error carried to the next collar; band edges are then
    moved so that every band holds exactly its cells' area.
    """
    if N < 2:
        raise ParameterError('a partition needs at least two cells')
    if sphere_dim == 1:
        return SpherePartition(1, np.array([0.0, np.pi]), np.array([N]))
    if sphere_dim != 2:
        raise ParameterError('partitions exist for sphere dimensions 1 and 2')

    if N == 2:
        counts = [1, 1]
    else:
        area = 4 * np.pi / N
        cap = 2 * np.arcsin(1 / np.sqrt(N))
        collars = max(1, _round_half_up((np.pi - 2 * cap) / np.sqrt(area)))
        height = (np.pi - 2 * cap) / collars
        counts = [1]
        carry = 0.0
        for i in range(collars):
            top = cap + i * height
            ideal = TWO_PI * (np.cos(top) - np.cos(top + height)) / area
            m = _round_half_up(ideal + carry)
            carry += ideal - m
            counts.append(m)
        counts.append(1)
        counts = [m for m in counts if m > 0]
        if sum(counts) != N:
            raise ParameterError('collar rounding lost cells for N={}'
                                 .format(N))

    cumulative = np.cumsum(counts)
    cos_edges = np.clip(1 - 2 * cumulative / N, -1, 1)
    edges = np.concatenate([[0.0], np.arccos(cos_edges)])
    edges[-1] = np.pi
    return SpherePartition(2, edges, np.array(counts))


@dataclass(frozen=True, eq=False)
class CellHistogram:
    partition: SpherePartition
    counts: np.ndarray
    total: int

    @property
    def fractions(self):
        return self.counts / self.total if self.total else \
            np.zeros_like(self.counts, dtype=float)

    def merge(self, other):
        return CellHistogram(self.partition, self.counts + other.counts,
                             self.total + other.total)


def cell_histogram(points, partition):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != partition.d:
        raise DimensionMismatchError('points in R^{} for a partition of '
                                     'S^{}'.format(points.shape[1],
                                                   partition.sphere_dim))
    norms = np.linalg.norm(points, axis=1)
    if np.any(norms == 0):
        raise ZeroReferenceError('cannot locate the zero vector')
    if np.any(np.abs(norms - 1) > 1e-9):
        raise ParameterError('points must lie on the unit sphere')
    cells = partition.locate(points / norms[:, None])
    counts = np.bincount(cells, minlength=partition.count)
    return CellHistogram(partition, counts, points.shape[0])


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def _inverse_covariance(covariance, d):
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    if covariance.shape != (d, d):
        raise DimensionMismatchError('covariance must be {0}x{0}'.format(d))
    try:
        np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        raise InvalidCovarianceError('covariance is not positive definite')
    return np.linalg.inv(covariance)


def _aw_unnormalized(omega, precision):
    d = precision.shape[0]
    quadratic = np.einsum('...i,ij,...j->...', omega, precision, omega)
    return quadratic**(-d / 2)


def _cell_integrals(partition, precision, nodes=48):
    x, w = special.roots_legendre(nodes)
    masses = []
    for cell in partition.cells:
        p0, p1 = cell.phi
        phi = 0.5 * (p1 - p0) * (x + 1) + p0
        phi_weights = 0.5 * (p1 - p0) * w
        if partition.sphere_dim == 1:
            values = _aw_unnormalized(partition.point(None, phi), precision)
            masses.append(phi_weights @ values)
            continue
        t0, t1 = cell.theta
        theta = 0.5 * (t1 - t0) * (x + 1) + t0
        theta_weights = 0.5 * (t1 - t0) * w * np.sin(theta)
        tt, pp = np.meshgrid(theta, phi, indexing='ij')
        values = _aw_unnormalized(partition.point(tt, pp), precision)
        masses.append(theta_weights @ values @ phi_weights)
    return np.array(masses)


def aw_density_cells(covariance, partition):
    """
    Cell masses of the density proportional to <Omega, Sigma^-1 Omega>^(-d/2).
    """
    precision = _inverse_covariance(covariance, partition.d)
    masses = _cell_integrals(partition, precision)
    return masses / masses.sum()


def aw_density(omega, covariance):
    """
    Normalized density (with respect to surface measure) at `omega`.
    """
    omega = np.asarray(omega, dtype=float)
    d = omega.shape[-1]
    if d not in (2, 3):
        raise ParameterError('the direction density is tabulated for d = 2, 3')
    precision = _inverse_covariance(covariance, d)
    normalizer = _cell_integrals(eq_partition(d - 1, 8), precision).sum()
    return _aw_unnormalized(omega, precision) / normalizer


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    points: np.ndarray
    weights: np.ndarray

    def pushforward(self, direction):
        """
        Law of <Omega, direction> under the atoms.
        """
        keep = self.weights > 0
        return EmpiricalLaw1D.from_samples(self.points[keep] @ direction,
                                           self.weights[keep])


def approximate_by_atoms(masses, partition):
    masses = np.asarray(masses, dtype=float)
    if masses.shape != (partition.count, ):
        raise DimensionMismatchError('need one mass per cell')
    if np.any(masses < 0) or abs(masses.sum() - 1) > 1e-8:
        raise ParameterError('cell masses must form a probability vector')
    return AtomicMeasure(partition.representatives, masses)


def mean_resultant_length(d, kappa):
    """
    E<Omega, z_hat> under the law proportional to exp(kappa <Omega, z_hat>)
    on S^{d-1}: the Bessel ratio I_{d/2}(kappa) / I_{d/2-1}(kappa).
    """
    if kappa == 0:
        return 0.0
    if d == 1:
        return float(np.tanh(kappa))
    return float(special.ive(d / 2, kappa) / special.ive(d / 2 - 1, kappa))


def estimate_kappa(d, resultant_length):
    """
    Invert `mean_resultant_length`; infinite for a perfectly aligned sample.
    """
    if resultant_length <= 0:
        return 0.0
    if resultant_length >= 1 - 1e-12:
        return float('inf')
    high = 1.0
    while mean_resultant_length(d, high) < resultant_length:
        high *= 2
        if high > 1e8:
            return float('inf')
    return float(optimize.brentq(
        lambda k: mean_resultant_length(d, k) - resultant_length, 0.0, high))


@dataclass(frozen=True, eq=False)
class WindowFingerprint:
    window: np.ndarray
    means: np.ndarray
    stdevs: np.ndarray
    direction: np.ndarray
    tilt: Optional[float]
    count: int


def fingerprint_state(configurations, constants, field=None, window=None,
                      coordinates=None):
    """
    Finite summary of a state from samples on a window of sites.

    `configurations` has shape (count, k, d).  `field` holds h on the window
    (unit scaling) or is None (scaled model).  The direction estimate is the
    normalized average of (phi - h) / r*; the tilt estimate, when latent
    coordinates are given, inverts the mean resultant length of x / |x| and
    is expressed as |z| = kappa / (beta r*).
    """
    configurations = np.asarray(configurations, dtype=float)
    count, k, d = configurations.shape
    if count < 100:
        raise ParameterError('a fingerprint needs at least 100 samples')
    if constants.r_star == 0:
        raise ParamagneticError('direction undefined when r* = 0')
    window = np.arange(k) if window is None else np.asarray(window)
    centered = configurations
    if field is not None:
        centered = configurations - np.asarray(field)[None, :, :]
    average = centered.mean(axis=(0, 1)) / constants.r_star
    norm = np.linalg.norm(average)
    if norm == 0:
        raise ZeroReferenceError('direction estimate vanished')

    tilt = None
    if coordinates is not None:
        x = np.asarray(coordinates, dtype=float)
        lengths = np.linalg.norm(x, axis=1)
        resultant = np.linalg.norm(
            (x[lengths > 0] / lengths[lengths > 0, None]).mean(axis=0))
        kappa = estimate_kappa(d, resultant)
        tilt = kappa / (constants.beta * constants.r_star)

    return WindowFingerprint(
        window=window,
        means=configurations.mean(axis=0),
        stdevs=configurations.std(axis=0),
        direction=average / norm,
        tilt=tilt,
        count=count,
    )


def pure_fingerprint(omega, constants, field=None, window=None, count=0):
    """
    Exact fingerprint of the pure state at `omega` on a window of k sites;
    `field` is h on the window or None for the scaled model.
    """
    omega = np.asarray(omega, dtype=float)
    if field is None:
        k = len(window)
        field = np.zeros((k, constants.d))
    means = constants.r_star * omega[None, :] + np.asarray(field)
    return WindowFingerprint(
        window=np.arange(means.shape[0]) if window is None else
        np.asarray(window),
        means=means,
        stdevs=np.full(means.shape, constants.site_stdev),
        direction=omega,
        tilt=None,
        count=count,
    )


def _coupling_cost(delta_mean, delta_stdev, nodes=64):
    # E min(|dm + ds Z|, 1) for standard normal Z, Gauss-Hermite (probabilists').
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    values = np.minimum(np.abs(delta_mean[..., None] +
                               delta_stdev[..., None] * z), 1.0)
    return values @ w


def product_bl_upper_bound(a, b, k=DEFAULT_WINDOW):
    """
    Upper bound on the bounded-Lipschitz distance between two product-like
    states summarized by fingerprints, using the first `k` window sites.

    Each (i, j) marginal is treated as Gaussian and coupled through its
    quantiles; site i of the window weighs 2^-i, component j weighs 2^-j,
    and sites beyond the window contribute their worst case 2^(1-k).
    """
    if not np.array_equal(a.window, b.window):
        raise DimensionMismatchError('fingerprints cover different windows')
    d = a.means.shape[1]
    if not 1 <= k <= a.means.shape[0]:
        raise ParameterError('k must lie between 1 and the window size')
    normalizer = 1 - 2.0**-d
    costs = _coupling_cost(a.means[:k] - b.means[:k],
                           a.stdevs[:k] - b.stdevs[:k])
    weights = np.outer(2.0**-np.arange(1, k + 1), 2.0**-np.arange(1, d + 1))
    return float(np.sum(weights * costs) / normalizer + 2.0**(1 - k))
