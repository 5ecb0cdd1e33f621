"""
Worker-pool task functions.

Every task is a module-level function of one picklable argument tuple and
derives its random streams from the master seed and its own index, so the
ordered results do not depend on the number of workers.  Nothing here
touches the ORM.
"""
import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..physics import streams
from ..physics.drivers import (
    ball_visits,
    brownian_occupation,
    generate_disorder,
    recurrence_statistic,
    walk_occupation,
    walk_path,
)
from ..physics.errors import ZeroReferenceError
from ..physics.measures import fingerprint_state
from ..physics.model import classify_regime, compute_sample_stats
from ..physics.overlap import overlap_experiment
from ..physics.sampler import replica_config, sample_gibbs, sample_mixture

logger = logging.getLogger(__name__)


def run_tasks(function, arguments, workers=1):
    """
    Map `function` over `arguments` in order, in-process for one worker and
    on a process pool otherwise.
    """
    arguments = list(arguments)
    if workers <= 1 or len(arguments) <= 1:
        return [function(a) for a in arguments]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, arguments))


def overlap_mean(args):
    """
    Mean replica overlap of one disorder draw.
    """
    spec, params, n, pairs, chain, seed, index = args
    task_seed = streams.child_seed(seed, streams.DISORDER, index)
    cfg = replica_config(chain, index)
    result = overlap_experiment(spec, params, n, pairs, cfg, task_seed)
    return result.law.mean, result.realized_R


def gibbs_fingerprint(args):
    """
    Fingerprint of the Gibbs state at volume n of the disorder drawn from
    `disorder_seed`, on a window of the first `window` sites.

    Returns the direction estimate, the tilt estimate and the walk sum S_n
    of the same disorder.
    """
    spec, params, n, draws, window, chain, disorder_seed, index = args
    h = generate_disorder(spec, n, disorder_seed)
    _, constants = classify_regime(params, spec.second_moments)
    cfg = replica_config(chain, index)
    stats = compute_sample_stats(h)
    mixture = sample_mixture(stats, params, n, cfg, draws)
    configurations = np.array([
        c.phi[:window] for c in sample_gibbs(h, params, cfg, draws, mixture)
    ])
    field = None if params.scaled else h.values[:window]
    try:
        fingerprint = fingerprint_state(configurations, constants, field,
                                        coordinates=mixture.flat_x)
    except ZeroReferenceError:
        return None, None, stats.walk_sum
    return fingerprint, fingerprint.tilt, stats.walk_sum


def conditioning_path(args):
    spec, N, seed, index = args
    path = walk_path(spec, 2 * N, streams.child_seed(seed, streams.PATH, index))
    statistic = recurrence_statistic(path, N)
    return statistic.value, statistic.doubled_value


def recurrence_visits(args):
    spec, radius, start, stop, seed, index = args
    path = walk_path(spec, stop, streams.child_seed(seed, streams.PATH, index))
    return ball_visits(path, radius, start, stop)


def walk_occupation_fractions(args):
    spec, N, partition, seed, index = args
    path = walk_path(spec, N, streams.child_seed(seed, streams.PATH, index))
    return walk_occupation(path, partition).fractions


def brownian_occupation_fractions(args):
    covariance, steps, partition, seed, index = args
    occupation = brownian_occupation(
        covariance, steps, partition,
        streams.child_seed(seed, streams.LIMIT, index))
    return occupation.fractions
