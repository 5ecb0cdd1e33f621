"""
Disorder generation, random-walk partial sums and Brownian paths.
"""
import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import streams
from .errors import InvalidCovarianceError, ParameterError
from .measures import cell_histogram
from .model import DisorderSample

logger = logging.getLogger(__name__)


class FieldKind(enum.Enum):
    TWO_POINT = 'two_point'
    GAUSSIAN = 'gaussian'
    UNIFORM_BOX = 'uniform_box'


@dataclass(frozen=True)
class FieldDistributionSpec:
    """
    A mean-zero disorder law.

    `scale` holds the per-component half-widths for `two_point` (values
    +-a_j) and `uniform_box` (U[-w_j, w_j]), and the covariance matrix for
    `gaussian`.
    """
    kind: FieldKind
    scale: np.ndarray

    def __post_init__(self):
        kind = FieldKind(self.kind)
        scale = np.array(self.scale, dtype=float)
        if kind is FieldKind.GAUSSIAN:
            if scale.ndim != 2 or scale.shape[0] != scale.shape[1]:
                raise InvalidCovarianceError('covariance must be square')
            if not np.allclose(scale, scale.T):
                raise InvalidCovarianceError('covariance must be symmetric')
        elif scale.ndim != 1 or np.any(scale <= 0):
            raise ParameterError('half-widths must be a positive vector')
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'scale', scale)
        try:
            cholesky = np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise InvalidCovarianceError(
                'covariance is not positive definite')
        object.__setattr__(self, '_cholesky', cholesky)

    @classmethod
    def two_point(cls, a):
        return cls(FieldKind.TWO_POINT, np.atleast_1d(a))

    @classmethod
    def gaussian(cls, covariance):
        return cls(FieldKind.GAUSSIAN, np.atleast_2d(covariance))

    @classmethod
    def uniform_box(cls, half_widths):
        return cls(FieldKind.UNIFORM_BOX, np.atleast_1d(half_widths))

    @property
    def d(self):
        return self.scale.shape[0]

    @property
    def covariance(self):
        if self.kind is FieldKind.GAUSSIAN:
            return self.scale
        if self.kind is FieldKind.TWO_POINT:
            return np.diag(self.scale**2)
        return np.diag(self.scale**2 / 3)

    @property
    def second_moments(self):
        return np.diag(self.covariance).copy()

    @property
    def mean_square_norm(self):
        return float(np.trace(self.covariance))

    def draw(self, rng, n):
        """
        Draw `n` rows.  Rows are produced sequentially so that the first k
        rows of a draw of size n equal a draw of size k.
        """
        shape = (n, self.d)
        if self.kind is FieldKind.TWO_POINT:
            signs = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
            return signs * self.scale
        if self.kind is FieldKind.UNIFORM_BOX:
            return (2 * rng.random(shape) - 1) * self.scale
        return rng.standard_normal(shape) @ self._cholesky.T

    def as_dict(self):
        return {'kind': self.kind.value, 'scale': self.scale.tolist()}


def generate_disorder(spec, n, seed):
    if n < 1:
        raise ParameterError('volume must be positive')
    rng = streams.generator(seed, streams.DISORDER)
    return DisorderSample(spec.draw(rng, n), spec)


@dataclass(frozen=True)
class WalkPath:
    sums: np.ndarray  # (N, d), row k holds S_{k+1}
    seed: Optional[int] = None

    @property
    def length(self):
        return self.sums.shape[0]

    @property
    def d(self):
        return self.sums.shape[1]

    @property
    def times(self):
        return np.arange(1, self.length + 1)

    @property
    def norms(self):
        return np.linalg.norm(self.sums, axis=1)

    @property
    def scaled(self):
        return self.sums / np.sqrt(self.times)[:, None]

    @property
    def directions(self):
        """
        S_n / |S_n|, with NaN rows where S_n = 0.
        """
        norms = self.norms
        with np.errstate(invalid='ignore', divide='ignore'):
            directions = self.sums / norms[:, None]
        directions[norms == 0] = np.nan
        return directions


def walk_path(spec, N, seed):
    if N < 1:
        raise ParameterError('walk length must be positive')
    h = generate_disorder(spec, N, seed)
    return WalkPath(np.cumsum(h.values, axis=0), seed)


@dataclass(frozen=True)
class RecurrenceStatistic:
    horizon: int
    value: float
    doubled_value: float

    @property
    def ratio(self):
        return self.doubled_value / self.value if self.value else float('nan')

    @property
    def decreasing(self):
        return self.doubled_value < self.value


def _near_origin_fraction(path, N):
    n = np.arange(1, N + 1)
    threshold = n**(0.5 - 1 / (2 * path.d))
    return float(np.mean(path.norms[:N] <= threshold))


def recurrence_statistic(path, horizon=None):
    """
    C_N = (1/N) sum_{n <= N} 1(|S_n| <= n^(1/2 - 1/(2d))) at N = `horizon`
    and at 2N; the path must cover 2N steps.
    """
    if path.d < 2:
        raise ParameterError('the recurrence statistic needs d >= 2')
    N = horizon or path.length // 2
    if N < 1 or 2 * N > path.length:
        raise ParameterError('path of length {} cannot cover 2 x {}'.format(
            path.length, N))
    return RecurrenceStatistic(N, _near_origin_fraction(path, N),
                               _near_origin_fraction(path, 2 * N))


def ball_visits(path, radius, start=1, stop=None):
    """
    Number of times n in [start, stop] with |S_n| <= radius.
    """
    stop = path.length if stop is None else min(stop, path.length)
    norms = path.norms[start - 1:stop]
    return int(np.count_nonzero(norms <= radius))


@dataclass(frozen=True)
class BrownianPath:
    times: np.ndarray
    values: np.ndarray


def brownian_path(covariance, steps, rng):
    covariance = np.atleast_2d(covariance)
    try:
        cholesky = np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        raise InvalidCovarianceError('covariance is not positive definite')
    dt = 1 / steps
    increments = rng.standard_normal((steps, covariance.shape[0]))
    values = np.zeros((steps + 1, covariance.shape[0]))
    values[1:] = np.cumsum(increments @ cholesky.T * np.sqrt(dt), axis=0)
    return BrownianPath(np.linspace(0, 1, steps + 1), values)


@dataclass(frozen=True)
class Occupation:
    fractions: np.ndarray
    positive_fraction: Optional[float] = None
    missing: int = 0


def _occupation(points, partition):
    """
    Occupation fractions of the directions of `points`; zero points are
    missing and excluded.
    """
    norms = np.linalg.norm(points, axis=1)
    valid = norms > 0
    missing = int(np.count_nonzero(~valid))
    points = points[valid]
    if points.shape[1] == 1:
        positive = float(np.mean(points[:, 0] > 0))
        return Occupation(np.array([1 - positive, positive]), positive,
                          missing)
    histogram = cell_histogram(points / norms[valid][:, None], partition)
    return Occupation(histogram.fractions, None, missing)


def brownian_occupation(covariance, steps, partition, seed):
    """
    Time fractions of B_t / |B_t| in the partition cells over [0, 1], with
    B evaluated at the left endpoints of the time grid.  For d = 1 the
    partition is ignored and the fractions are (negative, positive).
    """
    if steps < 1000:
        raise ParameterError('need at least 1000 time steps')
    rng = streams.generator(seed, streams.PATH)
    path = brownian_path(covariance, steps, rng)
    return _occupation(path.values[:-1], partition)


def walk_occupation(path, partition=None, start=1, stop=None):
    """
    pi_N(A) = (1/N) sum_n 1(S_n / |S_n| in A) over n in [start, stop].
    """
    stop = path.length if stop is None else stop
    return _occupation(path.sums[start - 1:stop], partition)


def arcsine_cdf(x):
    x = np.clip(np.asarray(x, dtype=float), 0, 1)
    return 2 / np.pi * np.arcsin(np.sqrt(x))
