"""
Experiment orchestration.

An experiment is a sequence of named stages.  Each stage gets a seed
derived from the master seed and its position, writes its result files
through `persistence` and reports metrics against their comparators.  The
metrics end up in ``metrics.json``, which `acceptance` reads back.
"""
import contextlib
import dataclasses
import importlib.metadata
import logging
import pathlib
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as scipy_stats

from ..physics import streams
from ..physics.basis import build_basis
from ..physics.drivers import FieldDistributionSpec, arcsine_cdf, \
    generate_disorder
from ..physics.errors import SphereLabError
from ..physics.limits import OverlapLawSpec, TiltedSphereLaw, rho_mean, rho_R
from ..physics.measures import (
    aw_density_cells,
    cell_histogram,
    eq_partition,
    product_bl_upper_bound,
    pure_fingerprint,
    total_variation,
)
from ..physics.model import (
    FieldScaling,
    ModelParams,
    RegimeClass,
    SampleStats,
    classify_regime,
    compute_sample_stats,
    maximizer_set_numeric,
)
from ..physics.overlap import (
    overlap_experiment,
    ultrametricity_rate,
    violates_ultrametricity,
)
from ..physics.sampler import (
    FUNCTIONALS,
    ChainConfig,
    MixtureCoordinate,
    mixture_quadrature_oracle,
    sample_gibbs,
    sample_microcanonical,
    sample_mixture,
    summarize_functionals,
)
from . import persistence, tasks
from .models import ExperimentRun, ResultFile
from .serializers import ExperimentConfigSerializer, ManifestSerializer

logger = logging.getLogger(__name__)

BETA_FACTORS = (2.5, 3, 4, 6, 10)
SECOND_MOMENT_NORMS = (0.05, 0.1, 0.2, 0.3)
MICROCANONICAL_VOLUMES = (100, 1000, 10000)
TRANSIENCE_VOLUMES = (1000, 10000)
PARTITION_SIZES = (8, 32, 128)
PURE_MATCH_THRESHOLD = 0.1
TILT_THRESHOLD = 10.0
CONDITIONING_THRESHOLD = 0.1
RECURRENCE_RADIUS = 2.0
RECURRENCE_START = 100

# Thresholds that enter metrics.json as comparators.
MATCH_FRACTION = 0.9
TRANSIENCE_FRACTION = 0.95
NSA_FLOOR = 0.02
VIOLATION_FLOOR = 0.05

DEFAULT_SIZES = {
    'gibbs_sample': {
        'n': 1000,
        'draws': 4000,
        'pairs': 200,
    },
    'overlap_unscaled': {
        'n': 1000,
        'pairs': 500,
        'disorders': 50,
        'draws': 100,
    },
    'overlap_scaled': {
        'n': 10000,
        'pairs': 2000,
        'disorders': 50,
        'draws': 100,
    },
    'ultrametricity': {
        'triples': 100000,
    },
    'metastate_aw': {
        'n': 1000,
        'replicas': 2000,
        'draws': 100,
        'window': 16,
        'cells': 16,
    },
    'metastate_ns': {
        'N': 10000,
        'paths': 1000,
        'steps': 10000,
        'cells': 8,
        'draws': 100,
        'window': 16,
    },
    'walk_diagnostics': {
        'N': 100000,
        'paths': 100,
        'replicas': 20,
        'draws': 100,
        'window': 16,
    },
    'partition_check': {
        'cells': 16,
        'draws': 1000000,
    },
}

DEFAULT_OPTIONS = {
    'paramagnetic_beta': 1.0,
    'kappa': 1.0,
}


class ConfigError(SphereLabError):
    def __init__(self, errors):
        super().__init__('invalid experiment configuration: {}'.format(errors))
        self.errors = errors


class ExperimentError(SphereLabError):
    """
    A stage of an experiment failed; `cause` is the underlying exception.
    """
    def __init__(self, stage, cause):
        super().__init__('stage {} failed: {}'.format(stage, cause))
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    model: Optional[ModelParams]
    field: Optional[FieldDistributionSpec]
    chain: ChainConfig
    sizes: dict
    options: dict
    output: pathlib.Path
    workers: int = 1

    @classmethod
    def from_data(cls, data):
        serializer = ExperimentConfigSerializer(data=data)
        if not serializer.is_valid():
            raise ConfigError(serializer.errors)
        attrs = serializer.validated_data
        return cls(
            kind=attrs['kind'],
            seed=attrs['seed'],
            model=attrs.get('model'),
            field=attrs.get('field'),
            chain=attrs['chain'],
            sizes={k: v
                   for k, v in attrs['sizes'].items() if v is not None},
            options=dict(attrs['options']),
            output=attrs['output'],
            workers=attrs['workers'],
        )

    def size(self, name):
        if name in self.sizes:
            return self.sizes[name]
        return DEFAULT_SIZES[self.kind][name]

    def option(self, name):
        return float(self.options.get(name, DEFAULT_OPTIONS[name]))

    def snapshot(self):
        """
        The resolved configuration as stored in the manifest.
        """
        model = None
        if self.model is not None:
            model = {
                'd': self.model.d,
                'beta': self.model.beta,
                'field_scaling': self.model.field_scaling.value,
            }
        return {
            'kind': self.kind,
            'seed': str(self.seed),
            'model': model,
            'field': self.field.as_dict() if self.field else None,
            'chain': dataclasses.asdict(self.chain),
            'sizes': dict(sorted(self.sizes.items())),
            'options': dict(sorted(self.options.items())),
            'output': str(self.output),
            'workers': self.workers,
        }

    @property
    def run_directory(self):
        return self.output / '{}-{}'.format(self.kind, self.seed)


def code_version():
    try:
        return importlib.metadata.version('spherelab')
    except importlib.metadata.PackageNotFoundError:
        return 'unknown'


class Context:
    """
    State shared by the stages of one run.
    """
    def __init__(self, cfg, run):
        self.cfg = cfg
        self.run = run
        self.metrics = {}

    @contextlib.contextmanager
    def stage(self, name):
        index = len(self.run.stage_seeds) + 1
        seed = streams.child_seed(self.cfg.seed, streams.STAGE, index)
        self.run.stage_seeds[name] = str(seed)
        self.run.save(update_fields=['stage_seeds'])
        logger.info('%s: stage %s started', self.cfg.kind, name)
        start = time.monotonic()
        try:
            yield seed
        except ExperimentError:
            raise
        except (SphereLabError, persistence.PersistenceError, ArithmeticError,
                ValueError, np.linalg.LinAlgError) as e:
            logger.error('%s: stage %s failed: %s', self.cfg.kind, name, e)
            raise ExperimentError(name, e) from e
        logger.info('%s: stage %s finished in %.2f s', self.cfg.kind, name,
                    time.monotonic() - start)

    def metric(self, name, value, comparator):
        self.metrics[name] = {
            'value': None if value is None else float(value),
            'comparator': float(comparator),
        }

    def persist(self, name, payload, fmt, header=None):
        return persistence.persist_results(self.run, name, payload, fmt,
                                           header)

    def chain(self, seed):
        return dataclasses.replace(self.cfg.chain, seed=seed)


def _unit_vector(d, j=0):
    return np.eye(d)[j]


def _lattice_field(spec, d):
    """
    Two-point field in dimension d with the same E|h|^2 as `spec`.
    """
    return FieldDistributionSpec.two_point(
        np.full(d, np.sqrt(spec.mean_square_norm / d)))


def _ferromagnetic_constants(params, moments):
    regime, constants = classify_regime(params, moments)
    if regime is not RegimeClass.FERROMAGNETIC_SPHERE:
        raise SphereLabError(
            'beta = {} is not in the ferromagnetic regime for d = {}'.format(
                params.beta, params.d))
    return constants


def _fraction(flags):
    flags = list(flags)
    return float(np.mean(flags)) if flags else 0.0


def gibbs_sample(ctx):
    cfg = ctx.cfg
    params, spec = cfg.model, cfg.field
    d = params.d

    with ctx.stage('maximizer'):
        rows = []
        for factor in BETA_FACTORS:
            for s_norm_sq in SECOND_MOMENT_NORMS:
                sweep = ModelParams(d, factor * d)
                moments = np.full(d, s_norm_sq / d)
                constants = _ferromagnetic_constants(sweep, moments)
                found = maximizer_set_numeric(SampleStats.from_moments(moments),
                                              sweep)
                error = max(abs(found.r_star - constants.r_star),
                            float(np.max(np.abs(found.y_star -
                                                constants.y_star))))
                rows.append((sweep.beta, s_norm_sq, found.r_star,
                             constants.r_star, error))
        ctx.persist('maximizer', rows, ResultFile.CSV,
                    ['beta', 's_norm_sq', 'r_numeric', 'r_closed', 'error'])
        ctx.metric('maximizer_error', max(r[-1] for r in rows), 0.0)

    with ctx.stage('oracle') as seed:
        volumes = cfg.sizes.get('volumes') or {1: [20, 40, 80],
                                               2: [20, 40]}.get(d, [])
        rows = []
        for i, n in enumerate(volumes):
            h = generate_disorder(spec, n,
                                  streams.child_seed(seed, streams.DISORDER, i))
            stats = compute_sample_stats(h)
            oracle = mixture_quadrature_oracle(stats, params, n)
            sample = sample_mixture(
                stats, params, n,
                ctx.chain(streams.child_seed(seed, streams.CHAIN, i)),
                cfg.size('draws'))
            summary = summarize_functionals(sample, stats, params)
            for key in FUNCTIONALS:
                mean, se = summary[key]
                exact = oracle.moments[key]
                if se > 0:
                    z = abs(mean - exact) / se
                else:
                    z = 0.0 if mean == exact else float('inf')
                rows.append((n, key, mean, se, exact, z))
        ctx.persist('oracle', rows, ResultFile.CSV,
                    ['n', 'functional', 'mean', 'se', 'quadrature', 'z'])
        if rows:
            ctx.metric('oracle_max_z', max(r[-1] for r in rows), 0.0)
        else:
            logger.info('no quadrature oracle for d = %d', d)

    with ctx.stage('constraint') as seed:
        n, draws = cfg.size('n'), cfg.size('draws')
        h = generate_disorder(spec, n, seed)
        stats = compute_sample_stats(h)
        chain = ctx.chain(seed)
        mixture = sample_mixture(stats, params, n, chain, draws)
        worst = 0.0
        for configuration in sample_gibbs(h, params, chain, draws, mixture):
            norm = float(np.sum(configuration.phi**2)) / n
            worst = max(worst, abs(norm - 1))
        ctx.persist('latent', ({
            'x': c.x,
            'y': c.y
        } for c in mixture), ResultFile.JSONL)
        ctx.persist('diagnostics', mixture.diagnostics.as_dict(),
                    ResultFile.JSON)
        ctx.metric('constraint_max_deviation', worst, 0.0)

    with ctx.stage('microcanonical') as seed:
        first = MixtureCoordinate(0.5 * _unit_vector(d),
                                  0.3 * _unit_vector(d, d - 1))
        if d == 1:
            x_b = np.array([-0.4])
        else:
            x_b = 0.4 * (np.cos(1) * _unit_vector(d) +
                         np.sin(1) * _unit_vector(d, 1))
        second = MixtureCoordinate(x_b, 0.2 * _unit_vector(d, d - 1))
        predicted = float(first.x @ second.x + first.y @ second.y)
        pairs = cfg.size('pairs')
        rows = []
        for i, n in enumerate(MICROCANONICAL_VOLUMES):
            h = generate_disorder(spec, n,
                                  streams.child_seed(seed, streams.DISORDER, i))
            basis = build_basis(h)
            rng_a = streams.generator(seed, streams.MICROCANONICAL, i, 0)
            rng_b = streams.generator(seed, streams.MICROCANONICAL, i, 1)
            overlaps = [
                float(np.sum(a.phi * b.phi)) / n for a, b in zip(
                    sample_microcanonical(first, basis, pairs, rng_a),
                    sample_microcanonical(second, basis, pairs, rng_b))
            ]
            mean = float(np.mean(overlaps))
            rows.append((n, mean, predicted, abs(mean - predicted) * np.sqrt(n)))
        ctx.persist('microcanonical', rows, ResultFile.CSV,
                    ['n', 'mean_overlap', 'predicted', 'scaled_gap'])
        ctx.metric('microcanonical_scaled_gap', max(r[-1] for r in rows), 0.0)


def _disorder_means(ctx, params, seed):
    cfg = ctx.cfg
    arguments = [(cfg.field, params, cfg.size('n'), cfg.size('draws'),
                  ctx.chain(seed), seed, i) for i in range(cfg.size('disorders'))]
    results = tasks.run_tasks(tasks.overlap_mean, arguments, cfg.workers)
    ctx.persist('disorders', ((i, mean, R) for i, (mean, R) in
                              enumerate(results)), ResultFile.CSV,
                ['disorder', 'mean_overlap', 'R'])
    return np.array([mean for mean, _ in results])


def overlap_unscaled(ctx):
    cfg = ctx.cfg
    params = dataclasses.replace(cfg.model, field_scaling=FieldScaling.UNIT)
    n, pairs = cfg.size('n'), cfg.size('pairs')
    summary = []

    with ctx.stage('ordered') as seed:
        result = overlap_experiment(cfg.field, params, n, pairs,
                                    ctx.chain(seed), seed)
        ctx.persist('overlaps', ({
            'q': q
        } for q in result.law.values), ResultFile.JSONL)
        ctx.metric('overlap_mean', result.law.mean, result.comparator_mean)
        ctx.metric('overlap_stdev', result.law.std, 0.0)
        summary.append(('ordered', params.beta, result.law.mean,
                        result.law.std, result.comparator_mean,
                        result.predicted_limit))

    with ctx.stage('paramagnetic') as seed:
        paramagnetic = ModelParams(params.d, cfg.option('paramagnetic_beta'))
        result = overlap_experiment(cfg.field, paramagnetic, n, pairs,
                                    ctx.chain(seed), seed)
        ctx.metric('paramagnetic_overlap_mean', result.law.mean,
                   result.comparator_mean)
        summary.append(('paramagnetic', paramagnetic.beta, result.law.mean,
                        result.law.std, result.comparator_mean,
                        result.predicted_limit))
        ctx.persist('summary', summary, ResultFile.CSV, [
            'phase', 'beta', 'mean', 'stdev', 'comparator',
            'predicted_limit'
        ])

    with ctx.stage('self_averaging') as seed:
        means = _disorder_means(ctx, params, seed)
        ctx.metric('disorder_mean_stdev', np.std(means, ddof=1), 0.0)


def overlap_scaled(ctx):
    cfg = ctx.cfg
    params = dataclasses.replace(cfg.model,
                                 field_scaling=FieldScaling.INVERSE_SQRT_VOLUME)
    n, pairs = cfg.size('n'), cfg.size('pairs')

    with ctx.stage('law') as seed:
        constants = _ferromagnetic_constants(params, np.zeros(params.d))
        result = overlap_experiment(cfg.field, params, n, pairs,
                                    ctx.chain(seed), seed)
        ctx.persist('overlaps', ({
            'q': q
        } for q in result.law.values), ResultFile.JSONL)
        ctx.metric('rho_distance', result.distance, 0.0)
        predicted = rho_mean(result.realized_R, params.d, params.beta,
                             constants.r_star)
        ctx.metric('conditional_mean', result.law.mean, predicted)
        if params.d <= 3:
            law_spec = OverlapLawSpec(result.realized_R, params.d, params.beta,
                                      constants.r_star)
            centers, density = rho_R(law_spec, 'quadrature').density()
            ctx.persist('rho_table', zip(centers, density), ResultFile.CSV,
                        ['q', 'density'])

    with ctx.stage('non_self_averaging') as seed:
        means = _disorder_means(ctx, params, seed)
        ctx.metric('disorder_mean_stdev', np.std(means, ddof=1), NSA_FLOOR)


def ultrametricity(ctx):
    cfg = ctx.cfg
    kappa = cfg.option('kappa')
    rows = []
    for d in (1, 2):
        with ctx.stage('triples_d{}'.format(d)) as seed:
            params = ModelParams(d, cfg.model.beta,
                                 FieldScaling.INVERSE_SQRT_VOLUME)
            constants = _ferromagnetic_constants(params, np.zeros(d))
            law = TiltedSphereLaw(kappa * _unit_vector(d), kappa)
            rate = ultrametricity_rate(law, constants, cfg.size('triples'),
                                       streams.generator(seed, streams.LIMIT))
            rows.append((d, kappa, rate))
            ctx.metric('violation_rate_d{}'.format(d), rate,
                       0.0 if d == 1 else VIOLATION_FLOOR)

    with ctx.stage('witness'):
        # Directions at 0, 60 and 120 degrees on the circle.
        angles = np.radians([0, 60, 120])
        a, b, c = (np.array([np.cos(t), np.sin(t)]) for t in angles)
        witnessed = bool(violates_ultrametricity(a @ b, b @ c, a @ c))
        ctx.metric('witness_violation', float(witnessed), 1.0)
        ctx.persist('violations', rows, ResultFile.CSV,
                    ['d', 'kappa', 'violation_rate'])


def _fingerprint_arguments(ctx, spec, params, n, count, seed):
    cfg = ctx.cfg
    return [(spec, params, n, cfg.size('draws'), cfg.size('window'),
             ctx.chain(seed), streams.child_seed(seed, streams.DISORDER, r), r)
            for r in range(count)]


def metastate_aw(ctx):
    """
    Directions of the pure states selected by independent disorders at one
    volume, against the cell masses of the direction law of the field.
    The law concerns the unscaled model; a scaled model is rejected.
    """
    cfg = ctx.cfg
    params = cfg.model
    d = params.d

    with ctx.stage('partition'):
        if d < 2:
            raise SphereLabError('the direction law needs d >= 2')
        if params.scaled:
            raise SphereLabError(
                'the direction law concerns unscaled fields')
        partition = eq_partition(d - 1, cfg.size('cells'))
        ctx.persist('partition', partition.as_dict(), ResultFile.JSON)

    covariance = cfg.field.covariance
    isotropic = FieldDistributionSpec.gaussian(
        np.trace(covariance) / d * np.eye(d))
    for name, spec in (('aw', cfg.field), ('isotropic', isotropic)):
        with ctx.stage(name) as seed:
            _ferromagnetic_constants(params, spec.second_moments)
            arguments = _fingerprint_arguments(ctx, spec, params,
                                               cfg.size('n'),
                                               cfg.size('replicas'), seed)
            results = tasks.run_tasks(tasks.gibbs_fingerprint, arguments,
                                      cfg.workers)
            directions = np.array([
                fingerprint.direction for fingerprint, _, _ in results
                if fingerprint is not None
            ])
            histogram = cell_histogram(directions, partition)
            predicted = aw_density_cells(spec.covariance, partition)
            ctx.persist('{}_directions'.format(name),
                        ({
                            'omega': omega
                        } for omega in directions), ResultFile.JSONL)
            ctx.persist('{}_histogram'.format(name),
                        zip(range(partition.count), histogram.counts,
                            histogram.fractions, predicted), ResultFile.CSV,
                        ['cell', 'count', 'fraction', 'predicted'])
            ctx.metric('{}_tv'.format(name),
                       total_variation(histogram.fractions, predicted), 0.0)


def _proxy_match(direction, walk_sum, partition):
    norm = np.linalg.norm(walk_sum)
    if direction is None or norm == 0:
        return False
    if partition is None:
        return bool(np.sign(direction[0]) == np.sign(walk_sum[0]))
    return partition.adjacent(int(partition.locate(direction)[0]),
                              int(partition.locate(walk_sum / norm)[0]))


def metastate_ns(ctx):
    cfg = ctx.cfg
    params = dataclasses.replace(cfg.model, field_scaling=FieldScaling.UNIT)
    spec = cfg.field
    d = params.d
    N, paths = cfg.size('N'), cfg.size('paths')
    partition = None if d == 1 else eq_partition(d - 1, cfg.size('cells'))

    if d == 1:
        with ctx.stage('arcsine') as seed:
            arguments = [(spec, N, None, seed, i) for i in range(paths)]
            fractions = tasks.run_tasks(tasks.walk_occupation_fractions,
                                        arguments, cfg.workers)
            positives = np.array([f[1] for f in fractions])
            ctx.persist('positive_fractions', ({
                'fraction': p
            } for p in positives), ResultFile.JSONL)
            ks = scipy_stats.kstest(positives, arcsine_cdf).statistic
            ctx.metric('arcsine_ks', ks, 0.0)
    else:
        with ctx.stage('walk_occupation') as seed:
            arguments = [(spec, N, partition, seed, i) for i in range(paths)]
            walk = np.mean(
                tasks.run_tasks(tasks.walk_occupation_fractions, arguments,
                                cfg.workers),
                axis=0)
        with ctx.stage('brownian_occupation') as seed:
            arguments = [(spec.covariance, cfg.size('steps'), partition, seed,
                          i) for i in range(paths)]
            brownian = np.mean(
                tasks.run_tasks(tasks.brownian_occupation_fractions, arguments,
                                cfg.workers),
                axis=0)
            ctx.persist('occupation', zip(range(partition.count), walk,
                                          brownian), ResultFile.CSV,
                        ['cell', 'walk', 'brownian'])
            ctx.metric('occupation_max_difference',
                       np.max(np.abs(walk - brownian)), 0.0)

    with ctx.stage('gibbs_proxy') as seed:
        _ferromagnetic_constants(params, spec.second_moments)
        volumes = [N * (k + 1) // 10 for k in range(10)]
        arguments = [(spec, params, n, cfg.size('draws'), cfg.size('window'),
                      ctx.chain(seed), seed, k) for k, n in enumerate(volumes)]
        results = tasks.run_tasks(tasks.gibbs_fingerprint, arguments,
                                  cfg.workers)
        rows = []
        for n, (fingerprint, _, walk_sum) in zip(volumes, results):
            direction = None if fingerprint is None else fingerprint.direction
            rows.append((n, float(np.linalg.norm(walk_sum)),
                         int(_proxy_match(direction, walk_sum, partition))))
        ctx.persist('proxy', rows, ResultFile.CSV, ['n', 's_norm', 'match'])
        ctx.metric('proxy_match_fraction', _fraction(r[-1] for r in rows),
                   MATCH_FRACTION)


def walk_diagnostics(ctx):
    cfg = ctx.cfg
    N, paths = cfg.size('N'), cfg.size('paths')
    planar = cfg.field if cfg.field.d == 2 else _lattice_field(cfg.field, 2)

    with ctx.stage('conditioning') as seed:
        arguments = [(planar, N, seed, i) for i in range(paths)]
        results = tasks.run_tasks(tasks.conditioning_path, arguments,
                                  cfg.workers)
        ctx.persist('conditioning', results, ResultFile.CSV,
                    ['c_n', 'c_2n'])
        ctx.metric(
            'conditioning_fraction',
            _fraction(value <= CONDITIONING_THRESHOLD and doubled < value
                      for value, doubled in results), MATCH_FRACTION)

    with ctx.stage('recurrence') as seed:
        lattice = _lattice_field(cfg.field, 2)
        arguments = [(lattice, RECURRENCE_RADIUS, RECURRENCE_START, N, seed, i)
                     for i in range(paths)]
        visits = tasks.run_tasks(tasks.recurrence_visits, arguments,
                                 cfg.workers)
        ctx.persist('recurrence', ((v, ) for v in visits), ResultFile.CSV,
                    ['visits'])
        ctx.metric('recurrence_fraction', _fraction(v > 0 for v in visits),
                   MATCH_FRACTION)

    with ctx.stage('transience') as seed:
        spatial = cfg.field if cfg.field.d == 3 else _lattice_field(
            cfg.field, 3)
        params = ModelParams(3, cfg.model.beta)
        constants = _ferromagnetic_constants(params, spatial.second_moments)
        window = cfg.size('window')
        rows = []
        volumes = cfg.sizes.get('volumes') or TRANSIENCE_VOLUMES
        for i, n in enumerate(volumes):
            volume_seed = streams.child_seed(seed, streams.DISORDER, i)
            arguments = _fingerprint_arguments(ctx, spatial, params, n,
                                               cfg.size('replicas'),
                                               volume_seed)
            results = tasks.run_tasks(tasks.gibbs_fingerprint, arguments,
                                      cfg.workers)
            for task_arguments, (fingerprint, tilt, walk_sum) in zip(
                    arguments, results):
                if fingerprint is None:
                    rows.append((n, None, None))
                    continue
                # The first sites of the disorder the replica was run on.
                h = generate_disorder(spatial, window, task_arguments[6])
                pure = pure_fingerprint(walk_sum / np.linalg.norm(walk_sum),
                                        constants, h.values)
                bound = product_bl_upper_bound(fingerprint, pure,
                                               k=min(16, window))
                rows.append((n, tilt, bound))
        ctx.persist('transience', rows, ResultFile.CSV,
                    ['n', 'tilt', 'pure_bound'])
        ctx.metric(
            'tilt_exceed_fraction',
            _fraction(t is not None and t > TILT_THRESHOLD
                      for _, t, _ in rows), TRANSIENCE_FRACTION)
        ctx.metric(
            'pure_match_fraction',
            _fraction(b is not None and b <= PURE_MATCH_THRESHOLD
                      for _, _, b in rows), TRANSIENCE_FRACTION)


def partition_check(ctx):
    cfg = ctx.cfg

    with ctx.stage('areas'):
        rows = []
        for sphere_dim in (1, 2):
            reference = None
            for N in PARTITION_SIZES:
                partition = eq_partition(sphere_dim, N)
                areas = partition.areas
                error = float(np.max(np.abs(areas - areas.sum() / N)))
                diameter = float(np.max(partition.diameters()))
                scaled = diameter * N**(1 / sphere_dim)
                reference = reference or scaled
                rows.append((sphere_dim, N, error, diameter,
                             scaled / reference))
        ctx.persist('partition_areas', rows, ResultFile.CSV,
                    ['sphere_dim', 'N', 'area_error', 'diameter', 'ratio'])
        ctx.metric('area_error', max(r[2] for r in rows), 0.0)
        ctx.metric('diameter_ratio', max(r[-1] for r in rows), 1.0)

    with ctx.stage('uniform_histogram') as seed:
        partition = eq_partition(2, cfg.size('cells'))
        rng = streams.generator(seed, streams.LIMIT)
        points = rng.standard_normal((cfg.size('draws'), 3))
        points /= np.linalg.norm(points, axis=1, keepdims=True)
        fractions = cell_histogram(points, partition).fractions
        ctx.persist('uniform_histogram', enumerate(fractions), ResultFile.CSV,
                    ['cell', 'fraction'])
        ctx.metric('uniform_histogram_error',
                   np.max(np.abs(fractions - 1 / partition.count)), 0.0)


RUNNERS = {
    'gibbs_sample': gibbs_sample,
    'overlap_unscaled': overlap_unscaled,
    'overlap_scaled': overlap_scaled,
    'ultrametricity': ultrametricity,
    'metastate_aw': metastate_aw,
    'metastate_ns': metastate_ns,
    'walk_diagnostics': walk_diagnostics,
    'partition_check': partition_check,
}


def _finish(run, status, start, stage='', error=''):
    run.status = status
    run.failed_stage = stage
    run.error = error
    run.wall_clock = time.monotonic() - start
    run.save(update_fields=[
        'status', 'failed_stage', 'error', 'wall_clock', 'stage_seeds',
        'modification_date'
    ])
    run.refresh_from_db()
    persistence.write_json(
        pathlib.Path(run.output_dir) / 'manifest.json',
        ManifestSerializer(run).data)


def run_experiment(cfg):
    """
    Run the experiment described by `cfg` and return its `ExperimentRun`.

    Result files go to ``<output>/<kind>-<seed>``.  A failing stage marks
    the run as failed, keeps the files written so far and raises
    `ExperimentError`.

    Result files and the run digest are byte-reproducible from `cfg`.
    ``manifest.json`` is not: it also records the run id, the wall clock
    and the output directory.
    """
    directory = cfg.run_directory
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExperimentError('setup', persistence.PersistenceError(
            directory, e))
    run = ExperimentRun.objects.create(
        kind=cfg.kind,
        seed=str(cfg.seed),
        config=cfg.snapshot(),
        code_version=code_version(),
        output_dir=str(directory),
    )
    logger.info('run %d: %s with seed %d', run.pk, cfg.kind, cfg.seed)
    ctx = Context(cfg, run)
    start = time.monotonic()
    try:
        RUNNERS[cfg.kind](ctx)
    except ExperimentError as e:
        ctx.persist('metrics', ctx.metrics, ResultFile.JSON)
        _finish(run, ExperimentRun.FAILED, start, e.stage, str(e.cause))
        raise
    ctx.persist('metrics', ctx.metrics, ResultFile.JSON)
    _finish(run, ExperimentRun.COMPLETED, start)
    logger.info('run %d completed in %.2f s', run.pk, run.wall_clock)
    return run
