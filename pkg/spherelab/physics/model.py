"""
Model parameters, disorder statistics, observables and tilting functions.

The n-spin Hamiltonian is

    H_n(phi) = -|M_n(phi)|^2 / (2 n) - c_n sum_i <h(i), phi(i)>,

with c_n = 1 for unit field scaling and c_n = n^(-1/2) for the scaled
model.  The finite-volume Gibbs state is a mixture over a latent point
(x, y) of the open ball B_2d(0, 1) whose log-density is governed by the
exponential tilting function

    psi_n(x, y) = beta/2 |x|^2 + beta <m_n, x> + beta <s_n, y>
                  + d/2 ln(1 - |x|^2 - |y|^2).
"""
import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateDisorderError,
    DimensionMismatchError,
    DomainError,
    NonConvergenceError,
    ParameterError,
)

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-10
STEP_TOLERANCE = 1e-12


class FieldScaling(enum.Enum):
    UNIT = 'unit'
    INVERSE_SQRT_VOLUME = 'inverse_sqrt_volume'


class TiltMode(enum.Enum):
    FINITE = 'finite'
    LIMIT = 'limit'


class RegimeClass(enum.Enum):
    UNIQUE_MAXIMIZER = 'unique_maximizer'
    FERROMAGNETIC_SPHERE = 'ferromagnetic_sphere'


class Symmetry(enum.Enum):
    POINT = 'point'
    ORBIT = 'orbit'


@dataclass(frozen=True)
class ModelParams:
    d: int
    beta: float
    field_scaling: FieldScaling = FieldScaling.UNIT

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError('spin dimension must be a positive integer')
        if not self.beta > 0:
            raise ParameterError('inverse temperature must be positive')
        object.__setattr__(self, 'd', int(self.d))
        object.__setattr__(self, 'beta', float(self.beta))
        object.__setattr__(self, 'field_scaling',
                           FieldScaling(self.field_scaling))

    @property
    def scaled(self):
        return self.field_scaling is FieldScaling.INVERSE_SQRT_VOLUME

    def field_factor(self, n):
        """
        Return the factor multiplying h(i) in the Hamiltonian at volume `n`.
        """
        return 1 / np.sqrt(n) if self.scaled else 1.0


@dataclass(frozen=True)
class DisorderSample:
    values: np.ndarray
    spec: Optional[object] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or not values.size:
            raise DimensionMismatchError(
                'disorder must be an (n, d) array, got shape {}'.format(
                    values.shape))
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    def truncate(self, n):
        """
        Return the sample restricted to the first `n` sites.
        """
        if not 1 <= n <= self.n:
            raise ParameterError('cannot truncate {} sites to {}'.format(
                self.n, n))
        return DisorderSample(self.values[:n], self.spec)


@dataclass(frozen=True)
class SampleStats:
    mean: np.ndarray
    stdev: np.ndarray
    walk_sum: Optional[np.ndarray] = None
    n: Optional[int] = None
    second_moments: Optional[np.ndarray] = None

    @classmethod
    def from_moments(cls, second_moments):
        """
        Limiting statistics m = 0, s_j = sqrt(E h_j^2).
        """
        moments = np.asarray(second_moments, dtype=float)
        if np.any(moments < 0):
            raise ParameterError('second moments must be nonnegative')
        return cls(
            mean=np.zeros_like(moments),
            stdev=np.sqrt(moments),
            second_moments=moments,
        )

    @property
    def d(self):
        return self.mean.shape[0]

    @property
    def degenerate(self):
        return self.n is not None and bool(np.any(self.stdev == 0))

    def require_nondegenerate(self):
        if self.degenerate:
            raise DegenerateDisorderError(
                'sample standard deviation vanishes in components {}'.format(
                    np.flatnonzero(self.stdev == 0).tolist()))
        return self


def compute_sample_stats(h):
    """
    Sample means, standard deviations and the walk sum of `h`.

    The walk sum is the sequential prefix sum so that it agrees bit for bit
    with `drivers.walk_path` on the same disorder.
    """
    values = h.values
    n = values.shape[0]
    walk_sum = np.cumsum(values, axis=0)[-1]
    mean = walk_sum / n
    variance = np.mean(values**2, axis=0) - mean**2
    stdev = np.sqrt(np.maximum(variance, 0.0))
    moments = getattr(h.spec, 'second_moments', None)
    stats = SampleStats(mean, stdev, walk_sum, n, moments)
    if stats.degenerate:
        logger.warning('degenerate disorder at n=%d: stdev=%s', n, stdev)
    return stats


def tilt_coefficients(stats, params, mode=TiltMode.FINITE):
    """
    Return the (m, s) pair entering the tilting function.
    """
    mode = TiltMode(mode)
    if stats.d != params.d:
        raise DimensionMismatchError('statistics have d={}, model has d={}'
                                     .format(stats.d, params.d))
    if mode is TiltMode.LIMIT:
        if stats.second_moments is None:
            raise ParameterError('limit mode needs the field second moments')
        m = np.zeros(params.d)
        s = np.sqrt(np.asarray(stats.second_moments, dtype=float))
        if params.scaled:
            s = np.zeros(params.d)
        return m, s
    if stats.n is None:
        return stats.mean, stats.stdev
    factor = params.field_factor(stats.n)
    return stats.mean * factor, stats.stdev * factor


@dataclass(frozen=True)
class Observables:
    energy: float
    magnetization: np.ndarray
    norm: float


def evaluate_observables(phi, h, params):
    phi = np.asarray(phi, dtype=float)
    if phi.shape != h.values.shape or phi.shape[1] != params.d:
        raise DimensionMismatchError(
            'configuration {} does not match disorder {} with d={}'.format(
                phi.shape, h.values.shape, params.d))
    n = phi.shape[0]
    magnetization = phi.sum(axis=0)
    norm = float(np.sum(phi * phi))
    field = params.field_factor(n) * float(np.sum(h.values * phi))
    energy = -float(magnetization @ magnetization) / (2 * n) - field
    return Observables(energy, magnetization, norm)


def _ball_slack(x, y):
    slack = 1 - np.sum(x * x, axis=-1) - np.sum(y * y, axis=-1)
    if np.any(slack <= 0):
        raise DomainError('argument outside the open unit ball')
    return slack


def tilt_values(x, y, stats, params, mode=TiltMode.FINITE):
    """
    Evaluate psi_n (finite mode) or its limit psi (limit mode) at (x, y).

    `x` and `y` may carry leading batch dimensions.
    """
    m, s = tilt_coefficients(stats, params, mode)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slack = _ball_slack(x, y)
    beta = params.beta
    value = (beta / 2 * np.sum(x * x, axis=-1) + beta * (x @ m) +
             beta * (y @ s) + params.d / 2 * np.log(slack))
    return value if np.ndim(value) else float(value)


def reduced_tilt_value(r, theta, y, stats, params, mode=TiltMode.FINITE):
    """
    Tilting function in the field-adapted frame: `r` = |x|, `theta` the
    angle between x and m, `y` the component of y along s.
    """
    if np.any(np.asarray(r) < 0) or np.any(np.asarray(theta) < 0) or \
            np.any(np.asarray(theta) > np.pi):
        raise DomainError('need r >= 0 and theta in [0, pi]')
    slack = 1 - np.asarray(r)**2 - np.asarray(y)**2
    if np.any(slack <= 0):
        raise DomainError('(r, y) outside the open unit disk')
    m, s = tilt_coefficients(stats, params, mode)
    beta = params.beta
    value = (beta / 2 * np.square(r) +
             beta * np.asarray(r) * np.linalg.norm(m) * np.cos(theta) +
             beta * np.linalg.norm(s) * np.asarray(y) +
             params.d / 2 * np.log(slack))
    return value if np.ndim(value) else float(value)


@dataclass(frozen=True)
class CriticalConstants:
    r_star: float
    y_star: np.ndarray
    s_norm_sq: float
    d: int
    beta: float

    @property
    def site_stdev(self):
        """
        Single-site standard deviation of the pure states at these
        constants; 1/sqrt(beta) in the ferromagnetic regime.
        """
        slack = 1 - self.r_star**2 - float(self.y_star @ self.y_star)
        return float(np.sqrt(slack / self.d))


def paramagnetic_radius(beta, d, s_norm):
    """
    Maximizing |y| when x = 0, from the one-dimensional model at beta/d.
    """
    if s_norm == 0:
        return 0.0
    a = 1 / (2 * (beta / d) * s_norm)
    return float(np.sqrt(1 + a * a) - a)


def classify_regime(params, second_moments):
    moments = np.asarray(second_moments, dtype=float)
    if moments.shape != (params.d, ):
        raise DimensionMismatchError('need {} second moments'.format(params.d))
    if np.any(moments < 0):
        raise ParameterError('second moments must be nonnegative')
    s = np.zeros(params.d) if params.scaled else np.sqrt(moments)
    s_norm_sq = float(s @ s)
    order = 1 - params.d / params.beta - s_norm_sq
    if order > 0:
        constants = CriticalConstants(
            float(np.sqrt(order)), s, s_norm_sq, params.d, params.beta)
        return RegimeClass.FERROMAGNETIC_SPHERE, constants

    s_norm = np.sqrt(s_norm_sq)
    radius = paramagnetic_radius(params.beta, params.d, s_norm)
    y_star = s / s_norm * radius if s_norm > 0 else np.zeros(params.d)
    constants = CriticalConstants(0.0, y_star, s_norm_sq, params.d,
                                  params.beta)
    return RegimeClass.UNIQUE_MAXIMIZER, constants


def maximizer_overlap_limit(params, second_moments):
    """
    Overlap of two replicas sitting at the maximizer: (r*)^2 + |y*|^2.
    """
    _, constants = classify_regime(params, second_moments)
    y_star = constants.y_star
    return constants.r_star**2 + float(y_star @ y_star)


@dataclass(frozen=True)
class Maximizer:
    r_star: float
    y_star: np.ndarray
    x_direction: Optional[np.ndarray]
    symmetry: Symmetry
    gradient_norm: float
    value: float


class _ReducedTilt:
    """
    psi restricted to x = r1 m_hat, y = r2 s_hat with r1 of either sign.
    """

    def __init__(self, beta, d, m_norm, s_norm):
        self.beta = beta
        self.d = d
        self.m_norm = m_norm
        self.s_norm = s_norm

    def value(self, p):
        r1, r2 = p
        slack = 1 - r1 * r1 - r2 * r2
        return (self.beta / 2 * r1 * r1 + self.beta * self.m_norm * r1 +
                self.beta * self.s_norm * r2 + self.d / 2 * np.log(slack))

    def gradient(self, p):
        r1, r2 = p
        slack = 1 - r1 * r1 - r2 * r2
        return np.array([
            self.beta * r1 + self.beta * self.m_norm - self.d * r1 / slack,
            self.beta * self.s_norm - self.d * r2 / slack,
        ])

    def gradient_scale(self, p):
        """
        Magnitude of the terms summed in the gradient, at least 1.
        """
        r1, r2 = np.abs(p)
        q = 1 - r1 * r1 - r2 * r2
        return max(1.0, self.beta * (r1 + self.m_norm + self.s_norm) +
                   self.d * (r1 + r2) / q)

    def hessian(self, p):
        r1, r2 = p
        q = 1 - r1 * r1 - r2 * r2
        d = self.d
        return np.array([
            [self.beta - d / q - 2 * d * r1 * r1 / q**2, -2 * d * r1 * r2 / q**2],
            [-2 * d * r1 * r2 / q**2, -d / q - 2 * d * r2 * r2 / q**2],
        ])

    def objective(self, u):
        """
        -psi and its gradient in unconstrained coordinates u, p = u/sqrt(1+|u|^2).
        """
        scale = 1 + u @ u
        p = u / np.sqrt(scale)
        jacobian = (np.eye(2) * scale - np.outer(u, u)) / scale**1.5
        return -self.value(p), -jacobian @ self.gradient(p)


def _quasi_newton(tilt):
    best = None
    for a in np.linspace(-0.8, 0.8, 5):
        for b in np.linspace(-0.8, 0.8, 5):
            p = np.array([a, b])
            if p @ p >= 0.95**2:
                continue
            u = p / np.sqrt(1 - p @ p)
            result = optimize.minimize(
                tilt.objective,
                u,
                jac=True,
                method='L-BFGS-B',
                bounds=[(-1e3, 1e3)] * 2,
                options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 500},
            )
            if best is None or result.fun < best.fun:
                best = result
    return best.x / np.sqrt(1 + best.x @ best.x)


def _newton(value, gradient, hessian, scale, p, inside, iterations=100):
    """
    Damped Newton ascent.  Returns the last iterate and whether it met the
    scaled gradient tolerance or took a step below STEP_TOLERANCE relative
    to |p|.
    """
    for _ in range(iterations):
        g = gradient(p)
        g_norm = np.linalg.norm(g)
        if g_norm <= GRADIENT_TOLERANCE * scale(p):
            return p, True
        try:
            step = -np.linalg.solve(hessian(p), g)
        except np.linalg.LinAlgError:
            return p, False
        if np.linalg.norm(step) <= STEP_TOLERANCE * max(1.0, np.linalg.norm(p)):
            return p, True
        # Rounding in psi is O(beta eps); a smaller gradient also counts.
        t = 1.0
        while t > 1e-12:
            candidate = p + t * step
            if inside(candidate) and (
                    value(candidate) > value(p) or
                    np.linalg.norm(gradient(candidate)) < g_norm):
                break
            t /= 2
        else:
            return p, False
        p = candidate
    return p, False


def _polish_symmetric(beta, d, s_norm, t, r2):
    """
    Newton polish for m = 0 in (t, r2) = (r1^2, r2), where psi is jointly
    concave.  Returns (r1, r2) and whether the polish converged.
    """
    # Boundary candidate t = 0: d/dr2 vanishes where
    # beta |s| (1 - r2^2) = d r2, a unique root in [0, 1).
    def edge(r):
        return beta * s_norm * (1 - r * r) - d * r

    r2_edge = 0.0 if s_norm == 0 else optimize.brentq(
        edge, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    if beta / 2 - d / (2 * (1 - r2_edge**2)) <= 1e-12 * beta:
        return (0.0, float(r2_edge)), True

    def value(p):
        return beta / 2 * p[0] + beta * s_norm * p[1] + d / 2 * np.log(
            1 - p[0] - p[1]**2)

    def gradient(p):
        q = 1 - p[0] - p[1]**2
        return np.array([beta / 2 - d / (2 * q), beta * s_norm - d * p[1] / q])

    def hessian(p):
        q = 1 - p[0] - p[1]**2
        return np.array([
            [-d / (2 * q * q), -d * p[1] / (q * q)],
            [-d * p[1] / (q * q), -d / q - 2 * d * p[1]**2 / (q * q)],
        ])

    def scale(p):
        q = 1 - p[0] - p[1]**2
        return max(1.0, beta / 2 + beta * s_norm + d * (0.5 + abs(p[1])) / q)

    start = np.array([max(t, 1e-3), r2])
    if start[0] + start[1]**2 >= 1:
        start = np.array([0.5 * (1 - r2_edge**2), r2_edge])
    (t, r2), converged = _newton(value, gradient, hessian, scale, start,
                                 lambda p: p[0] > 0 and p[0] + p[1]**2 < 1)
    return (float(np.sqrt(t)), float(r2)), converged


def maximizer_set_numeric(stats, params, mode=TiltMode.LIMIT):
    """
    Numerically maximize psi over the open ball.

    The rotational reduction leaves a function of (r1, r2) = (|x|, |y|)
    with both angles aligned to m and s.  A multistart quasi-Newton pass
    locates the basin and a Newton polish on the stationarity equations
    brings the maximizer to machine precision.  When m = 0 the polish runs
    in (t, r2) = (r1^2, r2), where the problem is jointly concave.
    Convergence is judged relative to the size of psi's terms;
    NonConvergenceError is raised when the polish stalls.
    """
    m, s = tilt_coefficients(stats, params, mode)
    m_norm = float(np.linalg.norm(m))
    s_norm = float(np.linalg.norm(s))
    beta, d = params.beta, params.d
    tilt = _ReducedTilt(beta, d, m_norm, s_norm)
    r1, r2 = _quasi_newton(tilt)
    logger.debug('quasi-Newton maximizer (%.6f, %.6f)', r1, r2)

    if m_norm == 0:
        (r1, r2), converged = _polish_symmetric(beta, d, s_norm, r1 * r1,
                                                abs(r2))
    else:
        (r1, r2), converged = _newton(
            tilt.value,
            tilt.gradient,
            tilt.hessian,
            tilt.gradient_scale,
            np.array([abs(r1), r2]),
            lambda p: p @ p < 1,
        )
    gradient_norm = float(np.linalg.norm(tilt.gradient((r1, r2))))
    if not converged:
        raise NonConvergenceError('maximizer did not converge', gradient_norm)

    orbit = m_norm == 0 and r1 > 0
    y_direction = s / s_norm if s_norm > 0 else np.zeros(d)
    return Maximizer(
        r_star=float(r1),
        y_star=r2 * y_direction,
        x_direction=None if orbit or m_norm == 0 else m / m_norm,
        symmetry=Symmetry.ORBIT if orbit else Symmetry.POINT,
        gradient_norm=gradient_norm,
        value=float(tilt.value((r1, r2))),
    )
