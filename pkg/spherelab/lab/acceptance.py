"""
Acceptance checks of finished runs against the limiting predictions.
"""
import logging
import pathlib
from dataclasses import dataclass
from typing import Callable, List

from . import persistence
from .models import ResultRecord
from .serializers import ReportSerializer
from .signals import file_digest

logger = logging.getLogger(__name__)

ABS = ResultRecord.ABSOLUTE
MAX = ResultRecord.AT_MOST
MIN = ResultRecord.AT_LEAST


def _always(_config):
    return True


def _low_dimension(config):
    return config['model']['d'] <= 2


def _one_dimension(config):
    return config['model']['d'] == 1


def _several_dimensions(config):
    return config['model']['d'] >= 2


@dataclass(frozen=True)
class Criterion:
    number: int
    kind: str
    metric: str
    rule: str
    tolerance: float
    citation: str
    applies: Callable[[dict], bool] = _always


CRITERIA = [
    Criterion(1, 'gibbs_sample', 'constraint_max_deviation', MAX, 1e-9,
              'spherical constraint |phi|^2 = n of the microcanonical '
              'construction'),
    Criterion(2, 'gibbs_sample', 'maximizer_error', MAX, 1e-8,
              'closed-form ferromagnetic maximizer r* = '
              'sqrt(1 - d/beta - |s|^2), y* = s'),
    Criterion(3, 'gibbs_sample', 'oracle_max_z', MAX, 3.0,
              'tensor-grid quadrature of the mixing law', _low_dimension),
    Criterion(4, 'gibbs_sample', 'microcanonical_scaled_gap', MAX, 5.0,
              'E R = <x^a, x^b> + <y^a, y^b> for microcanonical pairs'),
    Criterion(5, 'overlap_unscaled', 'overlap_mean', ABS, 0.02,
              'overlap concentration at (r*)^2 + |y*|^2 in the ordered '
              'phase'),
    Criterion(5, 'overlap_unscaled', 'overlap_stdev', MAX, 0.05,
              'degenerate overlap law of the unscaled model'),
    Criterion(5, 'overlap_unscaled', 'paramagnetic_overlap_mean', ABS, 0.02,
              'overlap of replicas at the unique paramagnetic maximizer'),
    Criterion(6, 'overlap_scaled', 'rho_distance', MAX, 0.05,
              'rho^R at R = |S_n| / sqrt(n), by quadrature'),
    Criterion(6, 'overlap_scaled', 'conditional_mean', ABS, 0.03,
              'mean (r*)^2 A_d(beta r* R)^2 of rho^R, '
              '(r*)^2 tanh^2(beta r* R) for d = 1'),
    Criterion(7, 'overlap_unscaled', 'disorder_mean_stdev', MAX, 0.01,
              'self-averaging of the unscaled overlap'),
    Criterion(7, 'overlap_scaled', 'disorder_mean_stdev', MIN, 0.0,
              'non-self-averaging of the scaled overlap through '
              '|S_n| / sqrt(n)'),
    Criterion(8, 'ultrametricity', 'violation_rate_d1', ABS, 0.0,
              'two-valued overlaps are ultrametric'),
    Criterion(8, 'ultrametricity', 'violation_rate_d2', MIN, 0.0,
              'positive violation probability under gamma^z on the circle'),
    Criterion(8, 'ultrametricity', 'witness_violation', ABS, 0.0,
              'witness triple at 0, 60 and 120 degrees'),
    Criterion(9, 'metastate_aw', 'aw_tv', MAX, 0.05,
              'direction density proportional to '
              '<Omega, Sigma^-1 Omega>^(-d/2)'),
    Criterion(9, 'metastate_aw', 'isotropic_tv', MAX, 0.05,
              'uniform direction law for isotropic disorder'),
    Criterion(10, 'metastate_ns', 'arcsine_ks', MAX, 0.05,
              'arcsine law of the positive-time fraction', _one_dimension),
    Criterion(10, 'metastate_ns', 'occupation_max_difference', MAX, 0.03,
              'time occupation of B_t / |B_t|', _several_dimensions),
    Criterion(10, 'metastate_ns', 'proxy_match_fraction', MIN, 0.0,
              'S_n / |S_n| tracks the finite-volume Gibbs state'),
    Criterion(11, 'walk_diagnostics', 'conditioning_fraction', MIN, 0.0,
              'vanishing frequency of |S_n| <= n^(1/4) in d = 2'),
    Criterion(11, 'walk_diagnostics', 'recurrence_fraction', MIN, 0.0,
              'recurrence of the planar lattice walk'),
    Criterion(12, 'partition_check', 'area_error', MAX, 1e-10,
              'equal-area recursive zonal partition'),
    Criterion(12, 'partition_check', 'diameter_ratio', MAX, 0.1,
              'diameter bound of order N^(-1/(d-1))'),
    Criterion(12, 'partition_check', 'uniform_histogram_error', MAX, 0.003,
              'uniform points fill equal-area cells evenly'),
    Criterion(13, 'walk_diagnostics', 'tilt_exceed_fraction', MIN, 0.0,
              'unbounded tilt |S_n| / sqrt(n) in the transient case'),
    Criterion(13, 'walk_diagnostics', 'pure_match_fraction', MIN, 0.0,
              'Gibbs state close to the pure state at S_n / |S_n| for '
              'd >= 3'),
]

INTEGRITY_CITATION = 'content digests recorded in the run manifest'


@dataclass
class Report:
    run: object
    records: List[ResultRecord]

    @property
    def passed(self):
        return bool(self.records) and all(r.passed for r in self.records)

    @property
    def failures(self):
        return [r for r in self.records if not r.passed]

    def as_dict(self):
        return ReportSerializer(self.run).data

    def render(self):
        lines = ['run {} ({}, seed {})'.format(self.run.pk, self.run.kind,
                                              self.run.seed)]
        for r in self.records:
            lines.append('[{}] {:>2} {} = {} against {} ({} {}): {}'.format(
                'PASS' if r.passed else 'FAIL',
                r.criterion,
                r.metric,
                'missing' if r.value is None else '{:.6g}'.format(r.value),
                'missing' if r.comparator is None else '{:.6g}'.format(
                    r.comparator),
                r.rule,
                '{:g}'.format(r.tolerance),
                r.citation,
            ))
        lines.append('{} of {} checks passed'.format(
            len(self.records) - len(self.failures), len(self.records)))
        return '\n'.join(lines)


def _stale_files(run):
    stale = 0
    for result in run.files.all():
        path = pathlib.Path(result.path)
        if not path.is_file() or file_digest(path) != result.digest:
            logger.warning('%s changed since the run', path)
            stale += 1
    return stale


def _read_metrics(run):
    result = run.files.filter(name='metrics').first()
    if result is None:
        return {}
    try:
        return persistence.read_json(result.path)
    except persistence.PersistenceError as e:
        logger.warning('cannot read metrics: %s', e)
        return {}


def verify_acceptance(run):
    """
    Evaluate every criterion of the run's kind against its metrics and
    store the outcome as `ResultRecord`s.  Metrics the run did not produce
    fail.
    """
    metrics = _read_metrics(run)
    run.records.all().delete()
    records = [
        ResultRecord(run=run, criterion=0, metric='stale_files',
                     value=_stale_files(run), comparator=0, tolerance=0,
                     rule=ABS, citation=INTEGRITY_CITATION)
    ]
    for criterion in CRITERIA:
        if criterion.kind != run.kind or not criterion.applies(run.config):
            continue
        entry = metrics.get(criterion.metric) or {}
        records.append(
            ResultRecord(
                run=run,
                criterion=criterion.number,
                metric=criterion.metric,
                value=entry.get('value'),
                comparator=entry.get('comparator'),
                tolerance=criterion.tolerance,
                rule=criterion.rule,
                citation=criterion.citation,
            ))
    for record in records:
        record.passed = record.evaluate()
        record.save()
        if not record.passed:
            logger.info('run %d: criterion %d (%s) failed', run.pk,
                        record.criterion, record.metric)
    return Report(run, records)
