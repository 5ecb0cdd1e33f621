import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx, raises

from spherelab.physics import streams
from spherelab.physics.basis import (
    build_basis,
    build_frames,
    change_of_frame,
    frame_from,
    hypersphere_roundtrip,
    sphere_to_angles,
)
from spherelab.physics.errors import (
    DimensionMismatchError,
    ParameterError,
    ZeroReferenceError,
)


def test_explicit_vectors_are_orthonormal(disorder):
    basis = build_basis(disorder)
    vectors = basis.explicit().reshape(2 * basis.d, -1)
    assert vectors @ vectors.T == approx(np.eye(2 * basis.d), abs=1e-12)


def test_completion_is_orthogonal_and_isometric(disorder):
    basis = build_basis(disorder)
    rng = streams.generator(3)
    coefficients = rng.standard_normal((5, basis.n - 2, basis.d))
    vectors = basis.complete(coefficients)
    explicit = basis.explicit().reshape(2 * basis.d, -1)
    assert vectors.reshape(5, -1) @ explicit.T == approx(0, abs=1e-12)
    assert np.sum(vectors**2, axis=(1, 2)) == approx(
        np.sum(coefficients**2, axis=(1, 2)))
    _, _, recovered = basis.coordinates(vectors)
    assert recovered == approx(coefficients, abs=1e-12)


def test_coordinates_of_explicit_vectors(disorder):
    basis = build_basis(disorder)
    first, second, rest = basis.coordinates(basis.explicit()[1, 0])
    assert first == approx([0, 0], abs=1e-12)
    assert second == approx([1, 0], abs=1e-12)
    assert rest == approx(0, abs=1e-12)


def test_projection_is_idempotent(disorder):
    basis = build_basis(disorder)
    phi = streams.generator(4).standard_normal((basis.n, basis.d))
    once = basis.project_to_completion(phi)
    assert basis.project_to_completion(once) == approx(once, abs=1e-12)


def test_basis_shape_errors(disorder):
    basis = build_basis(disorder)
    with raises(DimensionMismatchError):
        basis.coordinates(np.zeros((3, 2)))
    with raises(DimensionMismatchError):
        basis.complete(np.zeros((basis.n, basis.d)))


def test_frame_from():
    reference = np.array([1.0, 2.0, -2.0])
    frame = frame_from(reference)
    assert frame[0] == approx(reference / 3)
    assert frame @ frame.T == approx(np.eye(3), abs=1e-12)
    assert frame_from(np.array([2.0, 0])) == approx(np.eye(2))
    with raises(ZeroReferenceError):
        frame_from(np.zeros(2))


def test_change_of_frame():
    frames = build_frames(np.array([0.3, 0.4]), np.zeros(2))
    assert frames.U is None
    v = np.array([0.6, 0.8])
    assert change_of_frame(v, frames) == approx([1, 0])
    forward = change_of_frame(np.array([0.1, -2.0]), frames)
    assert change_of_frame(forward, frames, direction='inv') == approx(
        [0.1, -2.0])
    with raises(ZeroReferenceError):
        change_of_frame(v, frames, which='U')
    with raises(ParameterError):
        change_of_frame(v, frames, direction='sideways')


@settings(max_examples=50, deadline=None)
@given(
    theta=st.floats(min_value=0.01, max_value=3.13),
    phi=st.floats(min_value=0.0, max_value=6.28),
)
def test_angles_roundtrip(theta, phi):
    omega = hypersphere_roundtrip(np.array([theta, phi]))
    assert np.linalg.norm(omega) == approx(1)
    assert hypersphere_roundtrip(omega, 'decode') == approx([theta, phi],
                                                             abs=1e-9)


def test_angles_at_the_pole():
    assert sphere_to_angles(np.array([1.0, 0, 0])) == approx([0, 0])
    assert sphere_to_angles(np.array([-1.0, 0, 0])) == approx([np.pi, 0])
    with raises(ParameterError):
        sphere_to_angles(np.array([1.0]))
