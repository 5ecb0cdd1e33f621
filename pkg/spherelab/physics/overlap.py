"""
Replica overlaps, their limiting predictions and the ultrametricity test.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import streams
from .basis import build_basis
from .drivers import generate_disorder
from .errors import DimensionMismatchError, ParameterError
from .limits import OverlapLawSpec, rho_R, sample_gamma
from .measures import EmpiricalLaw1D, bl_distance_1d
from .model import (
    RegimeClass,
    classify_regime,
    compute_sample_stats,
    maximizer_overlap_limit,
)
from .sampler import (
    SpinConfiguration,
    replica_config,
    sample_microcanonical,
    sample_mixture,
)

logger = logging.getLogger(__name__)

__all__ = [
    'EmpiricalLaw1D',
    'OverlapResult',
    'ReplicaBatch',
    'overlap_experiment',
    'overlap_of_pair',
    'predicted_overlap_limit',
    'ultrametricity_rate',
    'violates_ultrametricity',
]


@dataclass(frozen=True, eq=False)
class ReplicaBatch:
    h: object
    replicas: List[SpinConfiguration]

    def __post_init__(self):
        for replica in self.replicas:
            if replica.phi.shape != self.h.values.shape:
                raise DimensionMismatchError(
                    'replica of shape {} for disorder of shape {}'.format(
                        replica.phi.shape, self.h.values.shape))

    def overlaps(self):
        """
        Overlaps of consecutive replica pairs (0, 1), (2, 3), ...
        """
        return np.array([
            overlap_of_pair(a, b)
            for a, b in zip(self.replicas[::2], self.replicas[1::2])
        ])


def overlap_of_pair(a, b):
    phi_a = getattr(a, 'phi', a)
    phi_b = getattr(b, 'phi', b)
    phi_a = np.asarray(phi_a, dtype=float)
    phi_b = np.asarray(phi_b, dtype=float)
    if phi_a.shape != phi_b.shape:
        raise DimensionMismatchError('replicas differ in shape: {} vs {}'
                                     .format(phi_a.shape, phi_b.shape))
    return float(np.sum(phi_a * phi_b) / phi_a.shape[0])


def predicted_overlap_limit(params, second_moments):
    """
    max{1 - d/beta, |s|^2} for the unscaled model.
    """
    if params.scaled:
        raise ParameterError('the deterministic overlap limit is stated for '
                             'the unscaled model')
    s_norm_sq = float(np.sum(second_moments))
    return max(1 - params.d / params.beta, s_norm_sq)


@dataclass(frozen=True, eq=False)
class OverlapResult:
    """
    Empirical overlap law of one disorder draw and its limiting comparator:
    a point mass (unscaled model) or rho^R at R = |S_n| / sqrt(n) (scaled).
    """
    law: EmpiricalLaw1D
    comparator: EmpiricalLaw1D
    comparator_mean: float
    realized_R: float
    predicted_limit: Optional[float]
    seed: int

    @property
    def distance(self):
        return bl_distance_1d(self.law, self.comparator)


def _replica_mixtures(stats, params, n, cfg, pairs):
    return [
        sample_mixture(stats, params, n, replica_config(cfg, replica), pairs)
        for replica in (0, 1)
    ]


def overlap_experiment(spec, params, n, pairs, cfg, seed):
    """
    Draw `pairs` replica pairs from the Gibbs state of one disorder
    realization and compare their overlap law to the limit.

    Each replica has its own set of latent chains, so the replicas are
    conditionally independent given h.
    """
    if pairs < 1:
        raise ParameterError('need at least one replica pair')
    moments = spec.second_moments
    if params.scaled:
        regime, constants = classify_regime(params, moments)
        if regime is not RegimeClass.FERROMAGNETIC_SPHERE:
            raise ParameterError('the scaled overlap law needs beta > d')
    h = generate_disorder(spec, n, seed)
    stats = compute_sample_stats(h)
    basis = build_basis(h)
    first, second = _replica_mixtures(stats, params, n, cfg, pairs)
    rng_a = streams.generator(seed, streams.REPLICA, 0)
    rng_b = streams.generator(seed, streams.REPLICA, 1)
    overlaps = np.empty(pairs)
    for k, (ca, cb) in enumerate(zip(first, second)):
        phi_a = next(sample_microcanonical(ca, basis, 1, rng_a))
        phi_b = next(sample_microcanonical(cb, basis, 1, rng_b))
        overlaps[k] = overlap_of_pair(phi_a, phi_b)
    law = EmpiricalLaw1D.from_samples(overlaps)

    realized_R = float(np.linalg.norm(stats.walk_sum) / np.sqrt(n))
    if params.scaled:
        law_spec = OverlapLawSpec(realized_R, params.d, params.beta,
                                  constants.r_star)
        if params.d <= 3:
            comparator = rho_R(law_spec, 'quadrature').law
        else:
            comparator = rho_R(law_spec, 'sample', count=100000,
                               rng=streams.generator(seed, streams.LIMIT))
        return OverlapResult(law, comparator, comparator.mean, realized_R,
                             None, seed)

    limit = maximizer_overlap_limit(params, moments)
    comparator = EmpiricalLaw1D.from_samples([limit])
    logger.debug('overlap n=%d: mean %.5f against %.5f', n, law.mean, limit)
    return OverlapResult(law, comparator, limit, realized_R,
                         predicted_overlap_limit(params, moments), seed)


def violates_ultrametricity(q_ab, q_bc, q_ac):
    return np.asarray(q_ac) < np.minimum(q_ab, q_bc)


def ultrametricity_rate(law, constants, triples, rng):
    """
    Empirical probability that q^{ac} < min{q^{ab}, q^{bc}} for i.i.d.
    triples drawn from gamma^z, with q^{xy} = (r*)^2 <Omega^x, Omega^y>.
    """
    if triples < 1000:
        raise ParameterError('need at least 1000 triples')
    a, b, c = (sample_gamma(law, triples, rng) for _ in range(3))
    scale = constants.r_star**2

    def q(u, v):
        return scale * np.sum(u * v, axis=1)

    return float(np.mean(violates_ultrametricity(q(a, b), q(b, c), q(a, c))))
