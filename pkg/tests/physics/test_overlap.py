import numpy as np
from pytest import approx, raises

from spherelab.physics import streams
from spherelab.physics.drivers import generate_disorder
from spherelab.physics.errors import DimensionMismatchError, ParameterError
from spherelab.physics.limits import TiltedSphereLaw, rho_mean
from spherelab.physics.model import (
    FieldScaling,
    ModelParams,
    classify_regime,
    maximizer_overlap_limit,
)
from spherelab.physics.overlap import (
    ReplicaBatch,
    overlap_experiment,
    overlap_of_pair,
    predicted_overlap_limit,
    ultrametricity_rate,
    violates_ultrametricity,
)
from spherelab.physics.sampler import ChainConfig, SpinConfiguration


def test_overlap_of_pair():
    a = np.full((4, 1), 1.0)
    b = np.array([[1.0], [-1.0], [1.0], [1.0]])
    assert overlap_of_pair(a, b) == approx(0.5)
    assert overlap_of_pair(SpinConfiguration(a), SpinConfiguration(b)) == \
        approx(0.5)
    with raises(DimensionMismatchError):
        overlap_of_pair(a, np.ones((4, 2)))


def test_replica_batch(disorder):
    phi = np.full((200, 2), np.sqrt(0.5))
    batch = ReplicaBatch(disorder, [SpinConfiguration(phi)] * 4)
    assert batch.overlaps() == approx([1, 1])
    with raises(DimensionMismatchError):
        ReplicaBatch(disorder, [SpinConfiguration(phi[:10])])


def test_predicted_overlap_limit():
    assert predicted_overlap_limit(ModelParams(1, 4), [0.25]) == approx(0.75)
    assert predicted_overlap_limit(ModelParams(1, 1), [0.25]) == approx(0.25)
    with raises(ParameterError):
        predicted_overlap_limit(
            ModelParams(1, 4, FieldScaling.INVERSE_SQRT_VOLUME), [0.25])


def test_violates_ultrametricity():
    assert violates_ultrametricity(0.5, 0.5, -0.5)
    assert not violates_ultrametricity(0.5, 0.2, 0.2)
    flags = violates_ultrametricity(np.array([0.5, 0.5]), np.array([0.5,
                                                                    0.5]),
                                    np.array([-0.5, 0.5]))
    assert flags.tolist() == [True, False]


def test_ultrametricity_rate():
    rng = streams.generator(1)
    line = classify_regime(ModelParams(1, 4, 'inverse_sqrt_volume'),
                           [0.0])[1]
    assert ultrametricity_rate(TiltedSphereLaw([1.0], 1.0), line, 5000,
                               rng) == 0
    circle = classify_regime(ModelParams(2, 4, 'inverse_sqrt_volume'),
                             [0.0, 0.0])[1]
    rate = ultrametricity_rate(TiltedSphereLaw([1.0, 0.0], 1.0), circle,
                               20000, rng)
    assert rate >= 0.05
    with raises(ParameterError):
        ultrametricity_rate(TiltedSphereLaw([1.0], 1.0), line, 999, rng)


def test_unscaled_overlap_experiment(lattice, ordered):
    cfg = ChainConfig(burn_in=300, thinning=2, seed=3)
    result = overlap_experiment(lattice, ordered, 300, 40, cfg, 21)
    h = generate_disorder(lattice, 300, 21)
    assert result.law.count == 40
    assert np.abs(result.law.values).max() <= 1 + 1e-9
    assert result.comparator_mean == approx(
        maximizer_overlap_limit(ordered, [0.25]))
    assert result.predicted_limit == approx(0.75)
    assert result.realized_R == approx(
        abs(h.values.sum()) / np.sqrt(300))
    assert result.distance >= 0


def test_scaled_overlap_experiment(lattice, scaled):
    cfg = ChainConfig(burn_in=300, thinning=2, seed=3)
    result = overlap_experiment(lattice, scaled, 300, 40, cfg, 22)
    r_star = classify_regime(scaled, [0.25])[1].r_star
    assert result.predicted_limit is None
    assert result.comparator_mean == approx(
        rho_mean(result.realized_R, 1, 4.0, r_star), abs=1e-9)
    with raises(ParameterError):
        overlap_experiment(lattice, ModelParams(1, 0.5, 'inverse_sqrt_volume'),
                           300, 4, cfg, 22)
    with raises(ParameterError):
        overlap_experiment(lattice, scaled, 300, 0, cfg, 22)
