"""Support-plane estimation from stance-foot positions.

At each stance exchange the four most recent ground-contact foot positions
(the pair leaving the ground and the pair that just touched down) are
rotated into the world frame and the plane normal is taken from the cross
product of the two diagonal difference vectors. Roll and pitch of the plane
follow one fixed convention, shared by the reward and the observation:

    roll  = atan2(n_y, n_z)
    pitch = -asin(n_x)

with the normal n flipped to point upward (n_z > 0) first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateContacts(ValueError):
    """The diagonal contact differences are (near-)parallel."""


@dataclass(frozen=True)
class ContactSnapshot:
    """Four body-frame foot positions plus the torso rotation at capture."""

    p_fl: np.ndarray
    p_fr: np.ndarray
    p_bl: np.ndarray
    p_br: np.ndarray
    torso_rotation: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        rot = np.asarray(self.torso_rotation, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError("torso_rotation must be 3x3")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-6):
            raise ValueError("torso_rotation must be orthonormal")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("torso_rotation must be right-handed")


@dataclass(frozen=True)
class PlaneEstimate:
    """Unit upward normal (world frame) with the derived roll and pitch."""

    normal: tuple
    roll: float
    pitch: float

    @classmethod
    def flat(cls) -> "PlaneEstimate":
        return cls(normal=(0.0, 0.0, 1.0), roll=0.0, pitch=0.0)


def angles_from_normal(n) -> tuple:
    """(roll, pitch) of a plane (or of a body's up-axis) under the pinned
    convention. n need not be normalized but must point upward-ish."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    roll = float(np.arctan2(n[1], n[2]))
    pitch = float(-np.arcsin(np.clip(n[0], -1.0, 1.0)))
    return roll, pitch


def capture_contact_pair(
    outgoing: dict,
    incoming: dict,
    torso_rotation: np.ndarray,
    timestamp: float = 0.0,
) -> ContactSnapshot:
    """Merge the lift-off pair and the touch-down pair into one snapshot.

    outgoing/incoming map leg ids ('FL', 'FR', 'BL', 'BR') to body-frame
    positions; together they must cover all four legs. Both captures are
    treated as simultaneous and share the touch-down torso rotation.
    """
    feet = {}
    feet.update(outgoing)
    feet.update(incoming)
    missing = {"FL", "FR", "BL", "BR"} - set(feet)
    if missing:
        raise ValueError(f"snapshot missing feet: {sorted(missing)}")
    return ContactSnapshot(
        p_fl=np.asarray(feet["FL"], dtype=float),
        p_fr=np.asarray(feet["FR"], dtype=float),
        p_bl=np.asarray(feet["BL"], dtype=float),
        p_br=np.asarray(feet["BR"], dtype=float),
        torso_rotation=np.asarray(torso_rotation, dtype=float),
        timestamp=timestamp,
    )


def plane_from_contacts(snapshot: ContactSnapshot) -> PlaneEstimate:
    """Fit the support plane through the snapshot's feet.

    Raises DegenerateContacts when the diagonals are collinear.
    """
    rot = np.asarray(snapshot.torso_rotation, dtype=float)
    p_fl = rot @ np.asarray(snapshot.p_fl, dtype=float)
    p_fr = rot @ np.asarray(snapshot.p_fr, dtype=float)
    p_bl = rot @ np.asarray(snapshot.p_bl, dtype=float)
    p_br = rot @ np.asarray(snapshot.p_br, dtype=float)
    n = np.cross(p_fr - p_bl, p_fl - p_br)
    norm = float(np.linalg.norm(n))
    if norm < 1e-9:
        raise DegenerateContacts("diagonal contact vectors are parallel")
    n = n / norm
    if n[2] < 0.0:
        n = -n
    roll, pitch = angles_from_normal(n)
    return PlaneEstimate(normal=tuple(float(v) for v in n), roll=roll, pitch=pitch)


class SlopeEstimator:
    """Single-owner stateful estimator: remembers the last good estimate.

    Starts flat. On degenerate contacts the previous estimate is returned
    and the degenerate flag is raised for the caller to inspect. An optional
    single-pole low-pass (smoothing in (0, 1], 1 = no filtering) is off by
    default.
    """

    def __init__(self, smoothing: float = 1.0):
        if not 0.0 < smoothing <= 1.0:
            raise ValueError("smoothing must lie in (0, 1]")
        self.smoothing = smoothing
        self._estimate = PlaneEstimate.flat()
        self.last_degenerate = False
        self.degenerate_count = 0

    @property
    def estimate(self) -> PlaneEstimate:
        return self._estimate

    def reset(self) -> None:
        self._estimate = PlaneEstimate.flat()
        self.last_degenerate = False
        self.degenerate_count = 0

    def update(self, snapshot: ContactSnapshot) -> PlaneEstimate:
        try:
            fresh = plane_from_contacts(snapshot)
        except DegenerateContacts:
            self.last_degenerate = True
            self.degenerate_count += 1
            return self._estimate
        self.last_degenerate = False
        if self.smoothing < 1.0:
            a = self.smoothing
            prev = np.asarray(self._estimate.normal)
            blended = a * np.asarray(fresh.normal) + (1.0 - a) * prev
            blended = blended / np.linalg.norm(blended)
            roll, pitch = angles_from_normal(blended)
            fresh = PlaneEstimate(normal=tuple(float(v) for v in blended), roll=roll, pitch=pitch)
        self._estimate = fresh
        return fresh
