"""Small rotation-matrix helpers shared by the simulator and estimators."""

import math

import numpy as np


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rodrigues(axis_angle) -> np.ndarray:
    """Rotation matrix for a rotation vector (axis * angle, radians)."""
    rx, ry, rz = float(axis_angle[0]), float(axis_angle[1]), float(axis_angle[2])
    angle = math.sqrt(rx * rx + ry * ry + rz * rz)
    if angle < 1e-12:
        # Second-order small-angle expansion keeps the integrator smooth
        # through near-zero angular velocity.
        s, scale = 1.0, 0.5
    else:
        s = math.sin(angle) / angle
        scale = (1.0 - math.cos(angle)) / (angle * angle)
    kx, ky, kz = s * rx, s * ry, s * rz
    xx, yy, zz = scale * rx * rx, scale * ry * ry, scale * rz * rz
    xy, xz, yz = scale * rx * ry, scale * rx * rz, scale * ry * rz
    return np.array(
        [
            [1.0 - yy - zz, xy - kz, xz + ky],
            [xy + kz, 1.0 - xx - zz, yz - kx],
            [xz - ky, yz + kx, 1.0 - xx - yy],
        ]
    )


def orthonormalize(rot: np.ndarray) -> np.ndarray:
    """Re-orthonormalize a drifting rotation matrix (Gram-Schmidt on columns)."""
    x = rot[:, 0]
    x = x / math.sqrt(x @ x)
    y = rot[:, 1] - (rot[:, 1] @ x) * x
    y = y / math.sqrt(y @ y)
    z = np.array([
        x[1] * y[2] - x[2] * y[1],
        x[2] * y[0] - x[0] * y[2],
        x[0] * y[1] - x[1] * y[0],
    ])
    return np.column_stack((x, y, z))


def yaw_of(rot: np.ndarray) -> float:
    """Heading of the body x-axis projected onto the world xy-plane."""
    return float(np.arctan2(rot[1, 0], rot[0, 0]))
