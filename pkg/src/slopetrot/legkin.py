"""Analytic kinematics for a 3-DOF quadruped leg.

Each leg is modeled as an abduction joint rotating the leg plane about the
leg-frame x-axis, followed by a planar hip/knee pair. The hip angle is
measured from the downward vertical and the knee angle is relative to the
upper link; with all angles zero the foot hangs straight below the hip at
a depth of (upper + lower) link length. The foot must stay inside a convex
planar safety polygon (a trapezoid by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class Unreachable(ValueError):
    """Target lies outside the reachable annulus of the planar pair."""


class JointLimitViolation(ValueError):
    """IK solution exists but violates a joint limit."""


@dataclass(frozen=True)
class LegJointAngles:
    """Joint angles (radians) for abduction, hip and knee actuators."""

    abd: float
    hip: float
    knee: float

    def as_array(self) -> np.ndarray:
        return np.array([self.abd, self.hip, self.knee])


@dataclass(frozen=True)
class FootPosition:
    """Foot position (meters) in the leg frame: origin at the hip mount,
    x forward, y lateral, z up (so a foot below the hip has z < 0)."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


# Trapezoidal safety region in the planar (x, z) leg coordinates, listed
# top-left, top-right, bottom-right, bottom-left. The bottom edge sits at
# z = -0.305 so every vertex stays inside the 0.325 m reach of the default
# links.
DEFAULT_WORKSPACE = (
    (-0.05, -0.18),
    (0.05, -0.18),
    (0.11, -0.305),
    (-0.11, -0.305),
)

# Mount points sit on outboard abduction brackets: the lateral half-spacing
# must exceed friction times the stance height or a hard lateral shove
# overturns the torso faster than weight transfer can restore it.
DEFAULT_HIP_POSITIONS = (
    (0.25, 0.20, 0.0),   # front-left
    (0.25, -0.20, 0.0),  # front-right
    (-0.25, 0.20, 0.0),  # back-left
    (-0.25, -0.20, 0.0), # back-right
)

DEFAULT_JOINT_LIMITS = (
    (-0.7, 0.7),  # abduction
    (-1.6, 1.6),  # hip
    (0.0, 2.6),   # knee (backward-flexing branch only)
)


@dataclass(frozen=True)
class LegGeometry:
    """Link lengths, mount points, joint limits and the safety polygon.

    All lengths in meters, angles in radians. hip_positions_body lists the
    four leg mount points in the body frame in the order FL, FR, BL, BR.
    """

    upper_link_len: float = 0.15
    lower_link_len: float = 0.175
    abduction_offset: float = 0.0
    hip_positions_body: tuple = DEFAULT_HIP_POSITIONS
    joint_limits: tuple = DEFAULT_JOINT_LIMITS
    workspace_polygon: tuple = DEFAULT_WORKSPACE

    def __post_init__(self):
        if self.upper_link_len <= 0.0 or self.lower_link_len <= 0.0:
            raise ValueError("link lengths must be positive")
        if len(self.hip_positions_body) != 4:
            raise ValueError("expected four hip mount points")
        if len(self.joint_limits) != 3:
            raise ValueError("expected limits for abd, hip, knee")
        for lo, hi in self.joint_limits:
            if lo > hi:
                raise ValueError("joint limit min exceeds max")
        poly = np.asarray(self.workspace_polygon, dtype=float)
        if poly.ndim != 2 or poly.shape[0] < 3 or poly.shape[1] != 2:
            raise ValueError("workspace polygon needs at least 3 planar vertices")
        _check_convex(poly)
        reach = self.upper_link_len + self.lower_link_len
        inner = abs(self.upper_link_len - self.lower_link_len)
        radii = np.hypot(poly[:, 0], poly[:, 1])
        if np.any(radii > reach + 1e-12):
            raise ValueError("workspace vertex beyond total leg length")
        if np.any(radii < inner - 1e-12):
            raise ValueError("workspace vertex inside the unreachable core")
        object.__setattr__(self, "_poly_cache", poly)

    @property
    def total_leg_length(self) -> float:
        return self.upper_link_len + self.lower_link_len

    def polygon_array(self) -> np.ndarray:
        return self._poly_cache


def _check_convex(poly: np.ndarray) -> None:
    n = len(poly)
    signs = []
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        c = poly[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) > 1e-12:
            signs.append(math.copysign(1.0, cross))
    if not signs:
        raise ValueError("degenerate workspace polygon")
    if any(s != signs[0] for s in signs):
        raise ValueError("workspace polygon must be convex")


def forward_kinematics(q: LegJointAngles, geometry: LegGeometry) -> FootPosition:
    """Closed-form foot position for the given joint angles.

    Total on finite input; joint limits are not checked here.
    """
    l1 = geometry.upper_link_len
    l2 = geometry.lower_link_len
    px = l1 * math.sin(q.hip) + l2 * math.sin(q.hip + q.knee)
    pz = -(l1 * math.cos(q.hip) + l2 * math.cos(q.hip + q.knee))
    ca, sa = math.cos(q.abd), math.sin(q.abd)
    d = geometry.abduction_offset
    return FootPosition(px, d * ca - pz * sa, d * sa + pz * ca)


def _abduction_split(p: FootPosition, geometry: LegGeometry):
    """Split a leg-frame point into (abduction angle, planar x, planar z).

    Raises Unreachable when the point is closer to the abduction axis than
    the lateral hip offset allows.
    """
    d = geometry.abduction_offset
    rr = p.y * p.y + p.z * p.z - d * d
    if rr < -1e-15:
        raise Unreachable("point inside the abduction offset cylinder")
    pz = -math.sqrt(max(rr, 0.0))
    abd = math.atan2(p.z, p.y) - math.atan2(pz, d)
    # wrap to (-pi, pi]
    abd = math.atan2(math.sin(abd), math.cos(abd))
    return abd, p.x, pz


def inverse_kinematics(
    p: FootPosition, geometry: LegGeometry, clip_to_limits: bool = False
) -> LegJointAngles:
    """Joint angles reaching the foot position, backward-flexing knee branch.

    Raises Unreachable when the target is outside the annulus of the planar
    pair and JointLimitViolation when the unique branch solution violates a
    joint limit. With clip_to_limits=True the solution is clamped into the
    limits instead of raising (the tracking error is then the caller's
    problem, which is how the simulator treats saturated joints).
    """
    abd, px, pz = _abduction_split(p, geometry)
    l1 = geometry.upper_link_len
    l2 = geometry.lower_link_len
    r2 = px * px + pz * pz
    lo = (l1 - l2) * (l1 - l2)
    hi = (l1 + l2) * (l1 + l2)
    if r2 > hi + 1e-12 or r2 < lo - 1e-12:
        raise Unreachable(f"planar target radius {math.sqrt(r2):.4f} m outside leg annulus")
    cos_knee = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    knee = math.acos(min(1.0, max(-1.0, cos_knee)))
    hip = math.atan2(px, -pz) - math.atan2(l2 * math.sin(knee), l1 + l2 * math.cos(knee))
    angles = (abd, hip, knee)
    limits = geometry.joint_limits
    if clip_to_limits:
        angles = tuple(min(max(a, lo), hi) for a, (lo, hi) in zip(angles, limits))
    else:
        for name, a, (lo_j, hi_j) in zip(("abd", "hip", "knee"), angles, limits):
            if a < lo_j - 1e-9 or a > hi_j + 1e-9:
                raise JointLimitViolation(f"{name} angle {a:.4f} rad outside [{lo_j}, {hi_j}]")
    return LegJointAngles(*angles)


def _point_in_polygon(px: float, pz: float, poly: np.ndarray, tol: float = 1e-12) -> bool:
    """Convex polygon membership, boundary inclusive, vertex order agnostic."""
    n = len(poly)
    area2 = 0.0
    for i in range(n):
        x1, z1 = poly[i]
        x2, z2 = poly[(i + 1) % n]
        area2 += x1 * z2 - x2 * z1
    orient = 1.0 if area2 >= 0.0 else -1.0
    for i in range(n):
        x1, z1 = poly[i]
        x2, z2 = poly[(i + 1) % n]
        cross = (x2 - x1) * (pz - z1) - (z2 - z1) * (px - x1)
        if orient * cross < -tol:
            return False
    return True


def in_workspace(p: FootPosition, geometry: LegGeometry) -> bool:
    """True when the planar projection of p (after the abduction split)
    lies inside the safety polygon, boundary inclusive."""
    try:
        _, px, pz = _abduction_split(p, geometry)
    except Unreachable:
        return False
    return _point_in_polygon(px, pz, geometry.polygon_array())


def _closest_point_on_polygon(px: float, pz: float, poly: np.ndarray):
    best = None
    best_d2 = math.inf
    n = len(poly)
    for i in range(n):
        ax, az = poly[i]
        bx, bz = poly[(i + 1) % n]
        ex, ez = bx - ax, bz - az
        denom = ex * ex + ez * ez
        t = 0.0 if denom == 0.0 else ((px - ax) * ex + (pz - az) * ez) / denom
        t = min(1.0, max(0.0, t))
        cx, cz = ax + t * ex, az + t * ez
        d2 = (px - cx) ** 2 + (pz - cz) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best = (cx, cz)
    return best


def clamp_to_workspace(p: FootPosition, geometry: LegGeometry) -> FootPosition:
    """Project an out-of-workspace point onto the polygon boundary.

    The abduction angle of the original point is preserved; only the planar
    coordinates move. Points already inside are returned unchanged.
    """
    d = geometry.abduction_offset
    rr = p.y * p.y + p.z * p.z - d * d
    if rr < 0.0:
        # Laterally inside the offset cylinder: fall back to a straight-down
        # posture at the same depth before projecting.
        abd, px, pz = 0.0, p.x, -abs(p.z)
    else:
        abd, px, pz = _abduction_split(p, geometry)
    poly = geometry.polygon_array()
    if _point_in_polygon(px, pz, poly):
        if rr >= 0.0:
            return p
    else:
        px, pz = _closest_point_on_polygon(px, pz, poly)
    ca, sa = math.cos(abd), math.sin(abd)
    return FootPosition(px, d * ca - pz * sa, d * sa + pz * ca)
