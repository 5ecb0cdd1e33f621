"""
Finite-volume Gibbs sampling through the mixture representation.

A configuration is drawn in two stages: a latent point (x, y) of the open
ball from the mixing law, whose unnormalized log-density is

    n psi_n(x, y) - (d + 1) ln(1 - |x|^2 - |y|^2),

and then a configuration from the shifted microcanonical measure at (x, y),
a uniform point on the sphere of radius sqrt(n (1 - |x|^2 - |y|^2)) in the
orthogonal complement of the field-adapted vectors plus a deterministic
shift.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import streams
from .basis import build_basis
from .errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    DomainError,
    EmptySampleError,
    ParameterError,
    QuadratureResolutionError,
)
from .model import (
    TiltMode,
    compute_sample_stats,
    maximizer_set_numeric,
    tilt_coefficients,
    tilt_values,
)

logger = logging.getLogger(__name__)

CONSTRAINT_TOLERANCE = 1e-9
TARGET_ACCEPTANCE = 0.3
RHAT_THRESHOLD = 1.1
QUADRATURE_TOLERANCE = 1e-4
FUNCTIONALS = ('x_norm', 'x_norm_sq', 'x_par', 'y_par', 'y_norm_sq')


@dataclass(frozen=True, eq=False)
class MixtureCoordinate:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape or x.ndim != 1:
            raise DimensionMismatchError('x and y must be d-vectors')
        if x @ x + y @ y >= 1:
            raise DomainError('latent point outside the open unit ball')
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)

    @property
    def d(self):
        return self.x.shape[0]

    @property
    def slack(self):
        return float(1 - self.x @ self.x - self.y @ self.y)


@dataclass(frozen=True, eq=False)
class SpinConfiguration:
    phi: np.ndarray
    coordinate: Optional[MixtureCoordinate] = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2:
            raise DimensionMismatchError('configuration must be (n, d)')
        n = phi.shape[0]
        deviation = abs(float(np.sum(phi * phi)) / n - 1)
        if deviation > CONSTRAINT_TOLERANCE:
            raise ConstraintViolationError(
                'N_n / n deviates from 1 by {:.3e}'.format(deviation))
        object.__setattr__(self, 'phi', phi)

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def d(self):
        return self.phi.shape[1]


@dataclass(frozen=True)
class ChainConfig:
    """
    Random-walk Metropolis settings.  Without an explicit proposal stdev
    the chain starts at 0.3 / sqrt(n).
    """
    proposal_stdev: Optional[float] = None
    burn_in: int = 2000
    thinning: int = 5
    chains: int = 4
    seed: int = 0
    orbit_moves: bool = True

    def __post_init__(self):
        for name in ('burn_in', 'thinning', 'chains'):
            if getattr(self, name) < 1:
                raise ParameterError('{} must be positive'.format(name))
        if self.proposal_stdev is not None and not self.proposal_stdev > 0:
            raise ParameterError('proposal stdev must be positive')


@dataclass(frozen=True)
class SamplerDiagnostics:
    acceptance_rate: float
    effective_sample_size: np.ndarray
    split_rhat: np.ndarray
    boundary_rejections: int
    proposal_stdev: float

    @property
    def converged(self):
        return bool(np.all(np.nan_to_num(self.split_rhat, nan=1.0) <=
                           RHAT_THRESHOLD))

    def as_dict(self):
        return {
            'acceptance_rate': self.acceptance_rate,
            'effective_sample_size': self.effective_sample_size.tolist(),
            'split_rhat': self.split_rhat.tolist(),
            'boundary_rejections': self.boundary_rejections,
            'proposal_stdev': self.proposal_stdev,
            'converged': self.converged,
        }


def log_mixture_density(x, y, stats, params, n):
    """
    Unnormalized log-density of the mixing law at (x, y); batch dimensions
    are allowed.  A `MixtureCoordinate` may be passed as `x` with `y` None.
    """
    if isinstance(x, MixtureCoordinate):
        x, y = x.x, x.y
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    psi = tilt_values(x, y, stats, params, TiltMode.FINITE)
    slack = 1 - np.sum(x * x, axis=-1) - np.sum(y * y, axis=-1)
    return n * psi - (params.d + 1) * np.log(slack)


def _uniform_directions(rng, shape, d):
    g = rng.standard_normal(shape + (d, ))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def _initial_state(stats, params, chains, rng):
    d = params.d
    maximizer = maximizer_set_numeric(stats, params, TiltMode.FINITE)
    if maximizer.x_direction is None:
        x = maximizer.r_star * _uniform_directions(rng, (chains, ), d)
    else:
        x = np.broadcast_to(maximizer.r_star * maximizer.x_direction,
                            (chains, d))
    y = np.broadcast_to(maximizer.y_star, (chains, d))
    # Pull the start strictly inside the ball.
    state = np.concatenate([x, y], axis=1) * (1 - 1e-9)
    return state


def _log_target(state, stats, params, n):
    d = params.d
    x, y = state[..., :d], state[..., d:]
    slack = 1 - np.sum(state * state, axis=-1)
    result = np.full(slack.shape, -np.inf)
    inside = slack > 0
    if np.any(inside):
        result[inside] = log_mixture_density(x[inside], y[inside], stats,
                                             params, n)
    return result


def _orbit_move(state, current, stats, params, n, rng):
    # x -> |x| u with u uniform on the sphere: symmetric on each sphere of
    # fixed radius, so the Metropolis ratio is the target ratio.
    d = params.d
    radius = np.linalg.norm(state[:, :d], axis=1, keepdims=True)
    proposal = state.copy()
    proposal[:, :d] = radius * _uniform_directions(rng, (state.shape[0], ), d)
    candidate = _log_target(proposal, stats, params, n)
    accept = np.log(rng.random(state.shape[0])) < candidate - current
    state[accept] = proposal[accept]
    current[accept] = candidate[accept]


@dataclass(frozen=True, eq=False)
class MixtureSample:
    """
    Latent draws kept per chain: `x` and `y` have shape (chains, draws, d).
    Flat views interleave chains draw by draw and stop at `requested`.
    """
    x: np.ndarray
    y: np.ndarray
    diagnostics: SamplerDiagnostics
    requested: int

    def _flat(self, values):
        return np.swapaxes(values, 0, 1).reshape(
            (-1, values.shape[-1]))[:self.requested]

    @property
    def flat_x(self):
        return self._flat(self.x)

    @property
    def flat_y(self):
        return self._flat(self.y)

    def __len__(self):
        return self.requested

    def __iter__(self):
        for x, y in zip(self.flat_x, self.flat_y):
            yield MixtureCoordinate(x, y)


def sample_mixture(stats, params, n, cfg, count):
    """
    Random-walk Metropolis on the open ball targeting the mixing law.

    Chains start on the maximizer of psi_n, at independent uniform angles
    when it is an orbit; the proposal scale is adapted toward 0.3 acceptance
    during burn-in and frozen afterwards.  Proposals leaving the ball are
    rejected.
    """
    if count < 1:
        raise ParameterError('count must be positive')
    d = params.d
    chains = cfg.chains
    rng = streams.generator(cfg.seed, streams.CHAIN)
    stdev = cfg.proposal_stdev or 0.3 / np.sqrt(n)

    state = _initial_state(stats, params, chains, rng)
    current = _log_target(state, stats, params, n)
    draws = -(-count // chains)
    kept = np.empty((chains, draws, 2 * d))
    accepted = proposed = boundary = 0
    block_accepted = 0
    total = cfg.burn_in + draws * cfg.thinning

    for step in range(total):
        proposal = state + stdev * rng.standard_normal(state.shape)
        candidate = _log_target(proposal, stats, params, n)
        boundary_hits = np.isneginf(candidate)
        accept = np.log(rng.random(chains)) < candidate - current
        state[accept] = proposal[accept]
        current[accept] = candidate[accept]
        if cfg.orbit_moves:
            _orbit_move(state, current, stats, params, n, rng)

        if step < cfg.burn_in:
            block_accepted += int(np.count_nonzero(accept))
            if (step + 1) % 50 == 0:
                rate = block_accepted / (50 * chains)
                stdev *= np.exp(rate - TARGET_ACCEPTANCE)
                block_accepted = 0
            continue
        accepted += int(np.count_nonzero(accept))
        proposed += chains
        boundary += int(np.count_nonzero(boundary_hits))
        offset = step - cfg.burn_in
        if offset % cfg.thinning == cfg.thinning - 1:
            kept[:, offset // cfg.thinning] = state

    ess = np.array([effective_sample_size(kept[:, :, k])
                    for k in range(2 * d)])
    rhat = np.array([split_rhat(kept[:, :, k]) for k in range(2 * d)])
    diagnostics = SamplerDiagnostics(
        acceptance_rate=accepted / proposed if proposed else 0.0,
        effective_sample_size=ess,
        split_rhat=rhat,
        boundary_rejections=boundary,
        proposal_stdev=float(stdev),
    )
    logger.debug('latent chains n=%d: acceptance %.3f, stdev %.3e', n,
                 diagnostics.acceptance_rate, stdev)
    if not diagnostics.converged:
        logger.warning('latent chains did not converge at n=%d: split R=%s',
                       n, np.round(rhat, 3).tolist())
    return MixtureSample(kept[:, :, :d], kept[:, :, d:], diagnostics, count)


def _autocovariance(chains):
    C, T = chains.shape
    centered = chains - chains.mean(axis=1, keepdims=True)
    spectrum = np.fft.rfft(centered, n=2 * T, axis=1)
    return np.fft.irfft(spectrum * np.conj(spectrum), n=2 * T,
                        axis=1)[:, :T] / T


def effective_sample_size(chains):
    """
    Multi-chain effective sample size of one scalar, with Geyer's initial
    positive sequence truncation.  `chains` has shape (chains, draws).
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    C, T = chains.shape
    if T < 4:
        return float('nan')
    acov = _autocovariance(chains)
    within = acov[:, 0].mean() * T / (T - 1)
    between = chains.mean(axis=1).var(ddof=1) if C > 1 else 0.0
    pooled = within * (T - 1) / T + between
    if pooled <= 0:
        return float('nan')
    rho = 1 - (within - acov.mean(axis=0)) / pooled
    rho[0] = 1.0
    tau = -1.0
    for k in range(0, T - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair < 0:
            break
        tau += 2 * pair
    return float(C * T / max(tau, 1e-12))


def split_rhat(chains):
    """
    Potential scale reduction on chains split into halves.
    """
    chains = np.atleast_2d(np.asarray(chains, dtype=float))
    half = chains.shape[1] // 2
    if half < 2:
        return float('nan')
    split = np.concatenate([chains[:, :half], chains[:, -half:]])
    within = split.var(axis=1, ddof=1).mean()
    between = split.mean(axis=1).var(ddof=1)
    if within == 0:
        return float('nan')
    pooled = (half - 1) / half * within + between
    return float(np.sqrt(pooled / within))


def _reference_directions(stats, params):
    m, s = tilt_coefficients(stats, params, TiltMode.FINITE)
    e1 = np.eye(params.d)[0]
    m_norm, s_norm = np.linalg.norm(m), np.linalg.norm(s)
    return (m / m_norm if m_norm > 0 else e1,
            s / s_norm if s_norm > 0 else e1)


def latent_functionals(x, y, stats, params):
    """
    (|x|, |x|^2, <x, m_hat>, <y, s_hat>, |y|^2) per latent draw; with m = 0
    the first canonical direction stands in for m_hat.
    """
    m_hat, s_hat = _reference_directions(stats, params)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_norm_sq = np.sum(x * x, axis=-1)
    return {
        'x_norm': np.sqrt(x_norm_sq),
        'x_norm_sq': x_norm_sq,
        'x_par': x @ m_hat,
        'y_par': y @ s_hat,
        'y_norm_sq': np.sum(y * y, axis=-1),
    }


def summarize_functionals(sample, stats, params):
    """
    Mean and Monte Carlo standard error of every latent functional, the
    error using the multi-chain effective sample size.
    """
    values = latent_functionals(sample.x, sample.y, stats, params)
    summary = {}
    for key, chains in values.items():
        ess = effective_sample_size(chains)
        if not np.isfinite(ess):
            ess = chains.size
        summary[key] = (float(chains.mean()),
                        float(chains.std() / np.sqrt(ess)))
    return summary


@dataclass(frozen=True)
class ConcentrationCheck:
    deviation: float
    bound: float

    @property
    def holds(self):
        return self.deviation <= self.bound + 1e-12


def concentration_check(values, in_set, sup_norm=None):
    """
    |E f - E[f | A]| against 2 |f|_inf / (1 + P(A) / P(A^c)) on empirical
    estimates; the bound is attained or respected exactly by any sample.
    """
    values = np.asarray(values, dtype=float)
    in_set = np.asarray(in_set, dtype=bool)
    if values.shape != in_set.shape:
        raise DimensionMismatchError('values and indicator differ in shape')
    p = in_set.mean()
    if p == 0:
        raise EmptySampleError('the conditioning set is empty')
    sup_norm = np.abs(values).max() if sup_norm is None else sup_norm
    deviation = abs(values.mean() - values[in_set].mean())
    bound = 0.0 if p == 1 else 2 * sup_norm / (1 + p / (1 - p))
    return ConcentrationCheck(float(deviation), float(bound))


@dataclass(frozen=True, eq=False)
class QuadratureResult:
    """
    `axes` are the midpoint grids: (x, y) for d = 1 and (r, theta, y_par)
    for d = 2.  `weights` is the normalized probability of each grid cell.
    """
    axes: tuple
    weights: np.ndarray
    moments: dict
    mass: float
    estimated_error: float
    tail_mass: Optional[float] = None


def _midpoints(low, high, k):
    edges = np.linspace(low, high, k + 1)
    return 0.5 * (edges[1:] + edges[:-1])


def _quadrature_d1(stats, params, n, resolution):
    m_hat, s_hat = _reference_directions(stats, params)
    axis = _midpoints(-1, 1, resolution)
    xx, yy = np.meshgrid(axis, axis, indexing='ij')
    inside = xx**2 + yy**2 < 1
    logw = np.full(xx.shape, -np.inf)
    logw[inside] = log_mixture_density(xx[inside, None], yy[inside, None],
                                       stats, params, n)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    xp, yp = xx * m_hat[0], yy * s_hat[0]
    moments = {
        'x_norm': np.sum(w * np.abs(xx)),
        'x_norm_sq': np.sum(w * xx**2),
        'x_par': np.sum(w * xp),
        'y_par': np.sum(w * yp),
        'y_norm_sq': np.sum(w * yy**2),
    }
    psi = np.full(xx.shape, -np.inf)
    psi[inside] = tilt_values(xx[inside, None], yy[inside, None], stats,
                              params, TiltMode.FINITE)
    tail = float(np.sum(w[psi < psi.max() - 0.05]))
    return (axis, axis), w, moments, tail


def _quadrature_d2(stats, params, n, resolution):
    # x in polar form (r, theta) about m_hat, y = y1 s_hat + y_perp; the
    # perpendicular part of y is integrated in closed form.
    m, s = tilt_coefficients(stats, params, TiltMode.FINITE)
    d = params.d
    beta = params.beta
    k = d - 1
    a = n * d / 2 - d - 1
    r = _midpoints(0, 1, resolution)
    theta = _midpoints(0, np.pi, resolution)
    y1 = _midpoints(-1, 1, resolution)
    rr, tt, yy = np.meshgrid(r, theta, y1, indexing='ij')
    c = 1 - rr**2 - yy**2
    inside = c > 0
    logw = np.full(rr.shape, -np.inf)
    logw[inside] = (
        (d - 1) * np.log(rr[inside]) + (d - 2) * np.log(np.sin(tt[inside])) +
        n * beta * (rr[inside]**2 / 2 + np.linalg.norm(m) * rr[inside] *
                    np.cos(tt[inside]) + np.linalg.norm(s) * yy[inside]) +
        (a + k / 2) * np.log(c[inside]))
    w = np.exp(logw - logw.max())
    w /= w.sum()
    perp = np.where(inside, c * k / (k + 2 * a + 2), 0.0)
    moments = {
        'x_norm': np.sum(w * rr),
        'x_norm_sq': np.sum(w * rr**2),
        'x_par': np.sum(w * rr * np.cos(tt)),
        'y_par': np.sum(w * yy),
        'y_norm_sq': np.sum(w * (yy**2 + perp)),
    }
    return (r, theta, y1), w, moments, None


def mixture_quadrature_oracle(stats, params, n, resolution=None):
    """
    Tensor-grid quadrature of the mixing law for d <= 2.

    The error estimate compares the moments at `resolution` and at half of
    it; estimates above 1e-4 raise `QuadratureResolutionError`.
    """
    if params.d == 1:
        resolution = resolution or 256
        if resolution > 256:
            raise ParameterError('d = 1 quadrature uses at most 256 points '
                                 'per axis')
        integrate = _quadrature_d1
    elif params.d == 2:
        resolution = resolution or 96
        integrate = _quadrature_d2
    else:
        raise ParameterError('quadrature oracle supports d <= 2')
    if resolution < 16:
        raise ParameterError('resolution must be at least 16')

    axes, weights, moments, tail = integrate(stats, params, n, resolution)
    _, _, coarse, _ = integrate(stats, params, n, resolution // 2)
    error = max(abs(moments[k] - coarse[k]) for k in FUNCTIONALS)
    logger.debug('quadrature d=%d n=%d resolution=%d error=%.2e', params.d,
                 n, resolution, error)
    if error > QUADRATURE_TOLERANCE:
        raise QuadratureResolutionError(
            'resolution {} too coarse at n={}'.format(resolution, n), error)
    return QuadratureResult(axes, weights,
                            {k: float(v) for k, v in moments.items()},
                            float(weights.sum()), float(error), tail)


def sample_microcanonical(coordinate, basis, count, rng, chunk=64):
    """
    Yield `count` configurations from the shifted microcanonical measure at
    `coordinate`; exact at every n >= 3.
    """
    n, d = basis.n, basis.d
    if coordinate.d != d:
        raise DimensionMismatchError('coordinate and basis differ in d')
    if n < 3:
        raise ParameterError('the microcanonical sphere needs n >= 3')
    shift = (coordinate.x[None, :] +
             coordinate.y[None, :] * np.sqrt(n) * basis.second)
    radius = np.sqrt(n * coordinate.slack)
    remaining = count
    while remaining > 0:
        size = min(chunk, remaining)
        g = rng.standard_normal((size, n - 2, d))
        g *= radius / np.sqrt(np.sum(g * g, axis=(1, 2)))[:, None, None]
        block = basis.complete(g) + shift
        for phi in block:
            yield SpinConfiguration(phi, coordinate)
        remaining -= size


def sample_gibbs(h, params, cfg, count, mixture=None):
    """
    Yield `count` configurations from the finite-volume Gibbs state: latent
    draws from `sample_mixture`, then one microcanonical draw each.
    """
    stats = compute_sample_stats(h)
    basis = build_basis(h)
    if mixture is None:
        mixture = sample_mixture(stats, params, h.n, cfg, count)
    rng = streams.generator(cfg.seed, streams.MICROCANONICAL)
    for coordinate in mixture:
        yield next(sample_microcanonical(coordinate, basis, 1, rng))


def replica_config(cfg, replica):
    """
    Chain settings of an independent replica; seeds split counter-style.
    """
    return replace(cfg, seed=streams.child_seed(cfg.seed, streams.REPLICA,
                                                replica))


@dataclass(frozen=True)
class MarginalParams:
    means: np.ndarray  # (k, d)
    stdev: float


def limit_marginal_params(coordinate, h, window):
    """
    Single-site laws of the limiting product measure at (x, y):
    mean x_j + y_j (h_j(i) - m_j) / s_j with m = 0 and s_j = sqrt(E h_j^2),
    common stdev sqrt((1 - |x|^2 - |y|^2) / d).
    """
    moments = getattr(h.spec, 'second_moments', None)
    if moments is None:
        raise ParameterError('the disorder carries no declared moments')
    window = np.asarray(window, dtype=int)
    if np.any(window < 0) or np.any(window >= h.n):
        raise ParameterError('window sites outside [0, n)')
    s = np.sqrt(np.asarray(moments, dtype=float))
    means = coordinate.x[None, :] + coordinate.y[None, :] * \
        h.values[window] / s[None, :]
    return MarginalParams(means, float(np.sqrt(coordinate.slack /
                                                coordinate.d)))
