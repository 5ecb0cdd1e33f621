import dataclasses

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx, mark, raises
from scipy import stats as distributions

from spherelab.physics import sampler, streams
from spherelab.physics.basis import build_basis
from spherelab.physics.drivers import generate_disorder
from spherelab.physics.errors import (
    ConstraintViolationError,
    DimensionMismatchError,
    DomainError,
    EmptySampleError,
    NonConvergenceError,
    ParameterError,
)
from spherelab.physics.model import DisorderSample, ModelParams, SampleStats, \
    compute_sample_stats
from spherelab.physics.sampler import (
    FUNCTIONALS,
    ChainConfig,
    MixtureCoordinate,
    SpinConfiguration,
    concentration_check,
    effective_sample_size,
    latent_functionals,
    limit_marginal_params,
    log_mixture_density,
    mixture_quadrature_oracle,
    replica_config,
    sample_gibbs,
    sample_microcanonical,
    sample_mixture,
    split_rhat,
    summarize_functionals,
)


def test_mixture_coordinate():
    coordinate = MixtureCoordinate([0.3, 0.4], [0.0, 0.5])
    assert coordinate.d == 2
    assert coordinate.slack == approx(0.5)
    with raises(DomainError):
        MixtureCoordinate([0.6], [0.8])
    with raises(DimensionMismatchError):
        MixtureCoordinate([0.1, 0.1], [0.1])


def test_spin_configuration():
    phi = np.full((10, 2), np.sqrt(0.5))
    assert SpinConfiguration(phi).n == 10
    with raises(ConstraintViolationError):
        SpinConfiguration(2 * phi)
    with raises(DimensionMismatchError):
        SpinConfiguration(np.ones(10))


def test_chain_config():
    with raises(ParameterError):
        ChainConfig(burn_in=0)
    with raises(ParameterError):
        ChainConfig(proposal_stdev=0.0)
    cfg = ChainConfig(seed=3)
    assert replica_config(cfg, 0).seed == replica_config(cfg, 0).seed
    assert replica_config(cfg, 0).seed != replica_config(cfg, 1).seed
    assert replica_config(cfg, 1).burn_in == cfg.burn_in


def test_log_mixture_density(disorder):
    stats = compute_sample_stats(disorder)
    params = ModelParams(2, 4)
    coordinate = MixtureCoordinate([0.2, 0.1], [0.3, -0.2])
    value = log_mixture_density(coordinate, None, stats, params, 200)
    assert value == approx(
        log_mixture_density(coordinate.x, coordinate.y, stats, params, 200))


def test_sample_mixture(disorder, quick_chain):
    stats = compute_sample_stats(disorder)
    params = ModelParams(2, 6)
    sample = sample_mixture(stats, params, 200, quick_chain, 101)
    assert sample.x.shape == (4, 26, 2)
    assert len(sample) == 101
    assert sample.flat_x.shape == (101, 2)
    radii = np.sum(sample.flat_x**2 + sample.flat_y**2, axis=1)
    assert (radii < 1).all()
    assert 0 < sample.diagnostics.acceptance_rate < 1
    assert set(sample.diagnostics.as_dict()) == {
        'acceptance_rate', 'effective_sample_size', 'split_rhat',
        'boundary_rejections', 'proposal_stdev', 'converged'
    }
    again = sample_mixture(stats, params, 200, quick_chain, 101)
    assert (again.x == sample.x).all()
    other = sample_mixture(stats, params, 200,
                           dataclasses.replace(quick_chain, seed=8), 101)
    assert (other.x != sample.x).any()
    with raises(ParameterError):
        sample_mixture(stats, params, 200, quick_chain, 0)


def test_sample_mixture_large_beta(disorder, quick_chain):
    stats = compute_sample_stats(disorder)
    sample = sample_mixture(stats, ModelParams(2, 38.01), 200, quick_chain, 40)
    assert len(sample) == 40


def test_sample_mixture_needs_maximizer(disorder, quick_chain, mocker):
    mocker.patch.object(sampler,
                        'maximizer_set_numeric',
                        side_effect=NonConvergenceError('stalled', 1.0))
    with raises(NonConvergenceError):
        sample_mixture(compute_sample_stats(disorder), ModelParams(2, 6), 200,
                       quick_chain, 10)


def test_sample_gibbs(disorder, quick_chain):
    params = ModelParams(2, 6)
    configurations = list(sample_gibbs(disorder, params, quick_chain, 20))
    assert len(configurations) == 20
    for configuration in configurations:
        assert configuration.phi.shape == (200, 2)
        assert np.sum(configuration.phi**2) / 200 == approx(1, abs=1e-9)
        assert configuration.coordinate is not None


def test_sample_gibbs_alignment(disorder, quick_chain):
    stats = compute_sample_stats(disorder)
    rescaled = (disorder.values - stats.mean) / stats.stdev
    for configuration in sample_gibbs(disorder, ModelParams(2, 6), quick_chain,
                                      10):
        coordinate = configuration.coordinate
        assert configuration.phi.mean(axis=0) == approx(coordinate.x)
        assert np.mean(configuration.phi * rescaled, axis=0) == approx(
            coordinate.y)


def test_paramagnetic_mixture_contracts():
    stats = SampleStats.from_moments([0.1, 0.4])
    params = ModelParams(2, 1.5)
    cfg = ChainConfig(burn_in=1000, thinning=5, chains=4, seed=3)
    x_norms = {
        n: summarize_functionals(sample_mixture(stats, params, n, cfg, 2000),
                                 stats, params)['x_norm'][0]
        for n in (200, 2000)
    }
    assert x_norms[2000] < 0.05
    assert x_norms[2000] < 0.5 * x_norms[200]


@mark.parametrize('site', [0, 7])
def test_microcanonical_marginals(planar_field, site):
    h = generate_disorder(planar_field, 2000, 5)
    coordinate = MixtureCoordinate([0.3, 0.1], [0.2, -0.3])
    marginal = limit_marginal_params(coordinate, h, [site])
    draws = np.array([
        phi.phi[site] for phi in sample_microcanonical(
            coordinate, build_basis(h), 500, streams.generator(6))
    ])
    for j in range(2):
        result = distributions.kstest(draws[:, j], 'norm',
                                      args=(marginal.means[0, j],
                                            marginal.stdev))
        assert result.pvalue > 1e-3


def test_microcanonical_shift(disorder):
    basis = build_basis(disorder)
    coordinate = MixtureCoordinate([0.5, -0.1], [0.2, 0.3])
    rng = streams.generator(1)
    for phi in sample_microcanonical(coordinate, basis, 5, rng, chunk=2):
        first, second, rest = basis.coordinates(phi.phi)
        assert first == approx(np.sqrt(200) * coordinate.x)
        assert second == approx(np.sqrt(200) * coordinate.y)
        assert np.sum(rest**2) == approx(200 * coordinate.slack)


def test_microcanonical_overlap(disorder):
    basis = build_basis(disorder)
    a = MixtureCoordinate([0.5, 0.0], [0.0, 0.3])
    b = MixtureCoordinate([0.2, 0.3], [0.0, 0.2])
    predicted = a.x @ b.x + a.y @ b.y
    overlaps = [
        np.sum(p.phi * q.phi) / 200 for p, q in zip(
            sample_microcanonical(a, basis, 400, streams.generator(2)),
            sample_microcanonical(b, basis, 400, streams.generator(3)))
    ]
    assert np.mean(overlaps) == approx(predicted, abs=0.02)


def test_microcanonical_needs_three_sites():
    h = DisorderSample(np.array([[0.0], [1.0]]))
    coordinate = MixtureCoordinate([0.1], [0.1])
    with raises(ParameterError):
        next(sample_microcanonical(coordinate, build_basis(h), 1,
                                   streams.generator(1)))


def test_effective_sample_size():
    rng = streams.generator(4)
    iid = rng.standard_normal((4, 1000))
    assert 2500 < effective_sample_size(iid) < 6000
    correlated = np.zeros((4, 1000))
    for t in range(1, 1000):
        correlated[:, t] = 0.9 * correlated[:, t - 1] + \
            rng.standard_normal(4)
    assert effective_sample_size(correlated) < 1000
    assert np.isnan(effective_sample_size(np.zeros((2, 3))))


def test_split_rhat():
    rng = streams.generator(5)
    iid = rng.standard_normal((4, 1000))
    assert split_rhat(iid) < 1.05
    shifted = iid + np.arange(4)[:, None]
    assert split_rhat(shifted) > 1.1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.booleans()), min_size=1,
                max_size=50).filter(lambda rows: any(r[1] for r in rows)))
def test_concentration_bound(rows):
    values = np.array([r[0] for r in rows])
    in_set = np.array([r[1] for r in rows])
    assert concentration_check(values, in_set).holds


def test_concentration_errors():
    with raises(EmptySampleError):
        concentration_check([1.0, 2.0], [False, False])
    with raises(DimensionMismatchError):
        concentration_check([1.0, 2.0], [True])


def test_quadrature_errors(disorder):
    stats = compute_sample_stats(disorder)
    with raises(ParameterError):
        mixture_quadrature_oracle(stats, ModelParams(2, 4), 200, resolution=8)
    with raises(ParameterError):
        mixture_quadrature_oracle(
            compute_sample_stats(DisorderSample(np.eye(3))),
            ModelParams(3, 4), 3)


def test_quadrature_matches_sampler(lattice, ordered):
    h = generate_disorder(lattice, 20, 12)
    stats = compute_sample_stats(h)
    oracle = mixture_quadrature_oracle(stats, ordered, 20)
    assert oracle.weights.sum() == approx(1)
    assert oracle.estimated_error <= 1e-4
    with raises(ParameterError):
        mixture_quadrature_oracle(stats, ordered, 20, resolution=512)

    cfg = ChainConfig(burn_in=1000, thinning=5, chains=4, seed=12)
    sample = sample_mixture(stats, ordered, 20, cfg, 4000)
    summary = summarize_functionals(sample, stats, ordered)
    for key in FUNCTIONALS:
        mean, se = summary[key]
        assert abs(mean - oracle.moments[key]) <= 3 * np.hypot(
            se, oracle.estimated_error)


def test_latent_functionals(disorder):
    stats = compute_sample_stats(disorder)
    values = latent_functionals(np.array([[0.3, 0.4]]), np.array([[0.0,
                                                                     0.1]]),
                                stats, ModelParams(2, 4))
    assert set(values) == set(FUNCTIONALS)
    assert values['x_norm'] == approx([0.5])
    assert values['y_norm_sq'] == approx([0.01])


def test_limit_marginal_params(disorder):
    coordinate = MixtureCoordinate([0.5, 0.0], [0.1, 0.2])
    marginal = limit_marginal_params(coordinate, disorder, range(4))
    s = np.sqrt([0.1, 0.4])
    expected = coordinate.x + coordinate.y * disorder.values[:4] / s
    assert marginal.means == approx(expected)
    assert marginal.stdev == approx(np.sqrt(coordinate.slack / 2))
    with raises(ParameterError):
        limit_marginal_params(coordinate, disorder, [200])
    with raises(ParameterError):
        limit_marginal_params(coordinate, DisorderSample(disorder.values),
                              range(4))


def test_quadrature_matches_sampler_planar(planar_field):
    h = generate_disorder(planar_field, 20, 12)
    stats = compute_sample_stats(h)
    params = ModelParams(2, 6)
    oracle = mixture_quadrature_oracle(stats, params, 20)
    assert oracle.weights.sum() == approx(1)

    cfg = ChainConfig(burn_in=1000, thinning=5, chains=4, seed=13)
    sample = sample_mixture(stats, params, 20, cfg, 4000)
    summary = summarize_functionals(sample, stats, params)
    for key in FUNCTIONALS:
        mean, se = summary[key]
        assert abs(mean - oracle.moments[key]) <= 3 * np.hypot(
            se, oracle.estimated_error)
