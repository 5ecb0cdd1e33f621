"""
Limiting states: pure states, tilted sphere laws, tilted mixtures and the
overlap laws of the scaled model.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, special

from .basis import frame_from
from .errors import DimensionMismatchError, ParameterError
from .measures import EmpiricalLaw1D, estimate_kappa, mean_resultant_length

logger = logging.getLogger(__name__)

GAMMA_GRID = 4096

__all__ = [
    'OverlapLawSpec',
    'PureStateSpec',
    'RhoTable',
    'TiltedSphereLaw',
    'estimate_kappa',
    'gamma_mean_alignment',
    'mean_d1',
    'rho_R',
    'rho_mean',
    'sample_gamma',
    'sample_pure_state',
    'sample_tilted_mixture',
]


@dataclass(frozen=True, eq=False)
class PureStateSpec:
    """
    The product Gaussian state magnetized along `omega`.  `field` holds h on
    the window sites (k, d), or None for the scaled model.
    """
    omega: np.ndarray
    constants: object
    field: Optional[np.ndarray] = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if abs(np.linalg.norm(omega) - 1) > 1e-12:
            raise ParameterError('omega must be a unit vector')
        if omega.shape != (self.constants.d, ):
            raise DimensionMismatchError('omega must be a d-vector')
        object.__setattr__(self, 'omega', omega)
        if self.field is not None:
            object.__setattr__(self, 'field',
                               np.atleast_2d(np.asarray(self.field, float)))

    def means(self, k):
        base = self.constants.r_star * self.omega[None, :]
        if self.field is None:
            return np.repeat(base, k, axis=0)
        if self.field.shape != (k, self.constants.d):
            raise DimensionMismatchError('field does not cover the window')
        return base + self.field


def _window_size(field, window):
    if field is not None:
        return np.atleast_2d(field).shape[0]
    if window is None:
        raise ParameterError('a window is needed without a field')
    return len(window)


def sample_pure_state(spec, count, rng, window=None):
    """
    `count` windowed configurations (count, k, d): independent Gaussians
    with mean r* Omega_j + h_j(i) and the pure-state site stdev.
    """
    k = _window_size(spec.field, window)
    means = spec.means(k)
    noise = rng.standard_normal((count, ) + means.shape)
    return means[None] + spec.constants.site_stdev * noise


@dataclass(frozen=True, eq=False)
class TiltedSphereLaw:
    """
    gamma^z on S^{d-1}, proportional to exp(kappa <Omega, z_hat>).
    """
    z: np.ndarray
    kappa: float

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if not self.kappa >= 0:
            raise ParameterError('concentration must be nonnegative')
        object.__setattr__(self, 'z', z)
        object.__setattr__(self, 'kappa', float(self.kappa))

    @classmethod
    def from_tilt(cls, z, beta, r_star):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return cls(z, beta * r_star * float(np.linalg.norm(z)))

    @property
    def d(self):
        return self.z.shape[0]

    @property
    def direction(self):
        norm = np.linalg.norm(self.z)
        return self.z / norm if norm > 0 else np.eye(self.d)[0]


def _tilted_cosines_d3(kappa, u):
    if kappa == 0:
        return 2 * u - 1
    # cos(theta) = 1 + ln(u + (1 - u) e^{-2 kappa}) / kappa, in log1p form.
    return 1 + np.log1p(-(1 - u) * -np.expm1(-2 * kappa)) / kappa


def _tilted_cosines_wood(d, kappa, count, rng):
    # Wood's rejection scheme for the cosine on S^{d-1}, d > 3.
    if kappa == 0:
        g = rng.standard_normal((count, d))
        return g[:, 0] / np.linalg.norm(g, axis=1)
    b = (-2 * kappa + np.sqrt(4 * kappa**2 + (d - 1)**2)) / (d - 1)
    x0 = (1 - b) / (1 + b)
    c = kappa * x0 + (d - 1) * np.log(1 - x0**2)
    result = np.empty(count)
    filled = 0
    while filled < count:
        size = count - filled
        z = rng.beta((d - 1) / 2, (d - 1) / 2, size)
        w = (1 - (1 + b) * z) / (1 - (1 - b) * z)
        log_u = np.log(rng.random(size))
        ok = kappa * w + (d - 1) * np.log(1 - x0 * w) - c >= log_u
        accepted = w[ok]
        result[filled:filled + accepted.size] = accepted
        filled += accepted.size
    return result


def _circle_angles(kappa, count, rng):
    grid = np.linspace(0, 2 * np.pi, GAMMA_GRID + 1)
    density = np.exp(kappa * (np.cos(grid) - 1))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] +
                                                  density[:-1]))])
    cdf /= cdf[-1]
    return np.interp(rng.random(count), cdf, grid)


def sample_gamma(law, count, rng):
    """
    `count` draws from gamma^z as rows of a (count, d) array.

    d = 1 is the two-point law, d = 2 inverts the angular CDF on a grid,
    d = 3 inverts the tilted cosine exactly and d > 3 uses rejection.
    """
    d, kappa = law.d, law.kappa
    pole = law.direction
    if d == 1:
        plus = rng.random(count) < special.expit(2 * kappa)
        return np.where(plus, 1.0, -1.0)[:, None] * pole
    if d == 2:
        angles = _circle_angles(kappa, count, rng)
        normal = np.array([-pole[1], pole[0]])
        return (np.cos(angles)[:, None] * pole +
                np.sin(angles)[:, None] * normal)
    if d == 3:
        w = _tilted_cosines_d3(kappa, rng.random(count))
    else:
        w = _tilted_cosines_wood(d, kappa, count, rng)
    w = np.clip(w, -1, 1)
    g = rng.standard_normal((count, d - 1))
    tangent = g / np.linalg.norm(g, axis=1, keepdims=True)
    local = np.concatenate([w[:, None], np.sqrt(1 - w * w)[:, None] * tangent],
                           axis=1)
    return local @ frame_from(pole)


def gamma_mean_alignment(d, kappa):
    """
    E<Omega, z_hat> under gamma^z by direct quadrature over the cosine
    w = <Omega, z_hat>, whose law is proportional to
    exp(kappa w) (1 - w^2)^((d - 3) / 2) on [-1, 1].
    """
    if d == 1:
        return float(np.tanh(kappa))
    if kappa == 0:
        return 0.0
    alpha = (d - 3) / 2

    def weighted(f):
        value, _ = integrate.quad(f, -1, 1, weight='alg', wvar=(alpha, alpha),
                                  limit=200)
        return value

    numerator = weighted(lambda w: w * np.exp(kappa * (w - 1)))
    normalizer = weighted(lambda w: np.exp(kappa * (w - 1)))
    return float(numerator / normalizer)


def sample_tilted_mixture(z, constants, field, count, rng, window=None):
    """
    Hierarchical draws from the tilted mixture: Omega ~ gamma^z, then one
    configuration of the pure state at Omega.
    """
    law = TiltedSphereLaw.from_tilt(z, constants.beta, constants.r_star)
    if law.d != constants.d:
        raise DimensionMismatchError('tilt and constants differ in d')
    k = _window_size(field, window)
    omegas = sample_gamma(law, count, rng)
    means = constants.r_star * omegas[:, None, :]
    if field is not None:
        means = means + np.asarray(field)[None]
    else:
        means = np.repeat(means, k, axis=1)
    noise = rng.standard_normal(means.shape)
    return means + constants.site_stdev * noise


@dataclass(frozen=True)
class OverlapLawSpec:
    R: float
    d: int
    beta: float
    r_star: float

    def __post_init__(self):
        if self.R < 0 or self.r_star < 0 or self.d < 1 or self.beta <= 0:
            raise ParameterError('invalid overlap law parameters')

    @property
    def kappa(self):
        return self.beta * self.r_star * self.R

    @property
    def scale(self):
        return self.r_star**2


@dataclass(frozen=True, eq=False)
class RhoTable:
    """
    Quadrature form of rho^R: weighted atoms in q.
    """
    law: EmpiricalLaw1D
    spec: OverlapLawSpec

    def density(self, bins=200):
        """
        Histogram density on [-(r*)^2, (r*)^2] as (centers, density).
        """
        edges = np.linspace(-self.spec.scale, self.spec.scale, bins + 1)
        masses, _ = np.histogram(self.law.values, edges,
                                 weights=self.law.probabilities)
        centers = 0.5 * (edges[1:] + edges[:-1])
        return centers, masses / np.diff(edges)


def _tilted_angle_weights(kappa, resolution):
    angles = 2 * np.pi * np.arange(resolution) / resolution
    weights = np.exp(kappa * (np.cos(angles) - 1))
    return angles, weights / weights.sum()


def _rho_quadrature(spec, resolution):
    q0, kappa = spec.scale, spec.kappa
    if spec.d == 1:
        p = special.expit(2 * kappa)
        same = p * p + (1 - p) * (1 - p)
        return EmpiricalLaw1D.from_samples([-q0, q0], [1 - same, same])
    if spec.d == 2:
        # Circular cross-correlation of the two angular densities gives the
        # law of the angle difference.
        angles, f = _tilted_angle_weights(kappa, resolution)
        spectrum = np.fft.rfft(f)
        g = np.fft.irfft(spectrum * np.conj(spectrum), n=resolution)
        g = np.clip(g, 0, None)
        return EmpiricalLaw1D.from_samples(q0 * np.cos(angles), g)
    if spec.d == 3:
        nodes = max(16, resolution // 64)
        w, lw = special.roots_legendre(nodes)
        fw = lw * np.exp(kappa * (w - 1))
        fw /= fw.sum()
        phi = 2 * np.pi * np.arange(nodes) / nodes
        wa, wb, dphi = np.meshgrid(w, w, phi, indexing='ij')
        q = wa * wb + np.sqrt((1 - wa**2) * (1 - wb**2)) * np.cos(dphi)
        weights = fw[:, None, None] * fw[None, :, None] * \
            np.full(nodes, 1 / nodes)[None, None, :]
        return EmpiricalLaw1D.from_samples(q0 * np.clip(q, -1, 1),
                                           weights)
    raise ParameterError('rho^R quadrature exists for d <= 3 only')


def rho_R(spec, mode='sample', count=100000, rng=None, resolution=4096):
    """
    The law of (r*)^2 <Omega^a, Omega^b> for independent Omega^a, Omega^b
    drawn from gamma^{R e_1}: an `EmpiricalLaw1D` of samples, or a
    `RhoTable` of quadrature atoms.
    """
    if mode == 'quadrature':
        return RhoTable(_rho_quadrature(spec, resolution), spec)
    if mode != 'sample':
        raise ParameterError('mode must be sample or quadrature')
    if rng is None:
        raise ParameterError('sampling needs a random generator')
    z = spec.R * np.eye(spec.d)[0]
    law = TiltedSphereLaw(z, spec.kappa)
    a = sample_gamma(law, count, rng)
    b = sample_gamma(law, count, rng)
    q = spec.scale * np.clip(np.sum(a * b, axis=1), -1, 1)
    if spec.d == 1:
        # Products of +-1 are exact.
        q = spec.scale * a[:, 0] * b[:, 0]
    return EmpiricalLaw1D.from_samples(q)


def mean_d1(R, beta, r_star):
    """
    Mean of rho^R for d = 1: (r*)^2 tanh^2(beta r* R).
    """
    return float(r_star**2 * np.tanh(beta * r_star * R)**2)


def rho_mean(R, d, beta, r_star):
    """
    Mean of rho^R in any dimension: (r*)^2 A_d(beta r* R)^2 with A_d the
    mean alignment of gamma^z.
    """
    return float(r_star**2 * mean_resultant_length(d, beta * r_star * R)**2)
