"""
Field-adapted orthonormal basis of (R^d)^n and the frames O, U.

For each component j the first two basis vectors live in that component
only:

    e_{1,j,n}(i) = 1/sqrt(n),
    e_{2,j,n}(i) = (h_j(i) - m_j) / (sqrt(n) s_j).

The remaining n - 2 vectors of each component are never stored.  They are
the images of the canonical directions 3..n under Q_j = H_1 H_{2,j}, where
H_1 reflects e_{1,j,n} onto the first canonical direction and H_{2,j}
then reflects the image of e_{2,j,n} onto the second.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatchError, ParameterError, ZeroReferenceError
from .model import compute_sample_stats


def _reflect(w, v):
    # I - 2 w w^T / |w|^2 applied column-wise; a zero column of `w` is the
    # identity.
    norm_sq = np.sum(w * w, axis=0)
    safe = np.where(norm_sq > 0, norm_sq, 1.0)
    coefficient = np.where(norm_sq > 0, 2 * np.sum(w * v, axis=0) / safe, 0.0)
    return v - w * coefficient


@dataclass(frozen=True)
class OrthonormalBasis:
    n: int
    d: int
    first: np.ndarray  # (n,), shared by every component
    second: np.ndarray  # (n, d), column j is e_{2,j,n}
    _w1: np.ndarray
    _w2: np.ndarray

    def explicit(self):
        """
        Return the 2d explicit vectors as an array of shape (2, d, n, d),
        indexed by (family, j, site, component).
        """
        vectors = np.zeros((2, self.d, self.n, self.d))
        for j in range(self.d):
            vectors[0, j, :, j] = self.first
            vectors[1, j, :, j] = self.second[:, j]
        return vectors

    def _q(self, phi):
        return self._apply(phi, [self._w2[:, None, :], self._w1[:, None, None]])

    def _q_transpose(self, phi):
        return self._apply(phi, [self._w1[:, None, None], self._w2[:, None, :]])

    @staticmethod
    def _apply(phi, reflections):
        # Reflections act on the site axis; batch dimensions ride along in
        # the middle axis.
        n, d = phi.shape[-2:]
        stacked = np.moveaxis(phi.reshape((-1, n, d)), 1, 0)
        for w in reflections:
            stacked = _reflect(w, stacked)
        return np.moveaxis(stacked, 0, 1).reshape(phi.shape)

    def coordinates(self, phi):
        """
        Split `phi` of shape (..., n, d) into its coordinates along the first
        family (..., d), the second family (..., d) and the completion
        (..., n - 2, d).
        """
        phi = np.asarray(phi, dtype=float)
        if phi.shape[-2:] != (self.n, self.d):
            raise DimensionMismatchError('expected (..., {}, {}), got {}'.format(
                self.n, self.d, phi.shape))
        rotated = self._q_transpose(phi)
        return rotated[..., 0, :], rotated[..., 1, :], rotated[..., 2:, :]

    def complete(self, coefficients):
        """
        Map completion coefficients (..., n - 2, d) to vectors (..., n, d).
        """
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape[-2:] != (self.n - 2, self.d):
            raise DimensionMismatchError('expected (..., {}, {}), got {}'.format(
                self.n - 2, self.d, coefficients.shape))
        padded = np.zeros(coefficients.shape[:-2] + (self.n, self.d))
        padded[..., 2:, :] = coefficients
        return self._q(padded)

    def project_to_completion(self, phi):
        """
        Orthogonal projection of `phi` onto the span of the completion.
        """
        return self.complete(self.coordinates(phi)[2])


def build_basis(h):
    stats = compute_sample_stats(h).require_nondegenerate()
    n, d = h.n, h.d
    if n < 2:
        raise ParameterError('the basis needs at least two sites')
    first = np.full(n, 1 / np.sqrt(n))
    second = (h.values - stats.mean) / (np.sqrt(n) * stats.stdev)

    w1 = first.copy()
    w1[0] -= 1
    image = _reflect(w1[:, None], second)
    w2 = image.copy()
    w2[1] -= 1
    w2[0] = 0
    return OrthonormalBasis(n, d, first, second, w1, w2)


@dataclass(frozen=True)
class FieldFrames:
    O: Optional[np.ndarray]
    U: Optional[np.ndarray]


def frame_from(reference):
    """
    Orthogonal d x d matrix whose first row is the direction of `reference`.
    """
    reference = np.asarray(reference, dtype=float)
    norm = np.linalg.norm(reference)
    if norm == 0:
        raise ZeroReferenceError('reference vector is zero')
    w = reference / norm
    w[0] -= 1
    norm_sq = w @ w
    if norm_sq == 0:
        return np.eye(reference.shape[0])
    return np.eye(reference.shape[0]) - 2 * np.outer(w, w) / norm_sq


def build_frames(m, s):
    """
    Frames for the field statistics; a zero reference leaves its frame unset.
    """
    def maybe(v):
        return frame_from(v) if np.linalg.norm(v) > 0 else None

    return FieldFrames(O=maybe(m), U=maybe(s))


def change_of_frame(v, frames, which='O', direction='fwd'):
    matrix = getattr(frames, which)
    if matrix is None:
        raise ZeroReferenceError('frame {} was built from a zero vector'
                                 .format(which))
    v = np.asarray(v, dtype=float)
    if direction == 'fwd':
        return matrix @ v
    if direction == 'inv':
        return matrix.T @ v
    raise ParameterError('direction must be fwd or inv')


def angles_to_sphere(angles):
    """
    Unit vector in R^d from hyperspherical angles (theta, phi_2, ...,
    phi_{d-1}): Omega_1 = cos(theta) and each further coordinate peels one
    more sine, the last coordinate taking the remaining sine product.
    """
    angles = np.asarray(angles, dtype=float)
    d = angles.shape[-1] + 1
    omega = np.empty(angles.shape[:-1] + (d, ))
    sines = np.ones(angles.shape[:-1])
    for k in range(d - 1):
        omega[..., k] = sines * np.cos(angles[..., k])
        sines = sines * np.sin(angles[..., k])
    omega[..., d - 1] = sines
    return omega


def sphere_to_angles(omega):
    """
    Inverse of `angles_to_sphere`; at coordinate singularities the remaining
    angles are 0.
    """
    omega = np.asarray(omega, dtype=float)
    d = omega.shape[-1]
    if d < 2:
        raise ParameterError('hyperspherical angles need d >= 2')
    angles = np.zeros(omega.shape[:-1] + (d - 1, ))
    for k in range(d - 2):
        tail = np.linalg.norm(omega[..., k + 1:], axis=-1)
        angles[..., k] = np.where(
            tail > 0,
            np.arctan2(tail, omega[..., k]),
            np.where(omega[..., k] < 0, np.pi, 0.0),
        )
    last = np.arctan2(omega[..., d - 1], omega[..., d - 2])
    angles[..., d - 2] = np.mod(last, 2 * np.pi)
    if d > 2:
        # Singular points keep the azimuth at 0.
        tail = np.linalg.norm(omega[..., d - 2:], axis=-1)
        angles[..., d - 2] = np.where(tail > 0, angles[..., d - 2], 0.0)
    return angles


def hypersphere_roundtrip(value, direction='encode'):
    """
    `encode` maps angles to a unit vector, `decode` maps back.
    """
    if direction == 'encode':
        return angles_to_sphere(value)
    if direction == 'decode':
        return sphere_to_angles(value)
    raise ParameterError('direction must be encode or decode')
