"""Planar primitives: points, segments, discs and the predicates between them.

Boundary contact counts as intersection everywhere in this module.
"""
from __future__ import annotations

import math
from typing import NamedTuple


class Point2(NamedTuple):
    x: float
    y: float


class Segment2(NamedTuple):
    a: Point2
    b: Point2


class Disc(NamedTuple):
    center: Point2
    radius: float


def distance(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def point_in_disc(p, d: Disc) -> bool:
    return distance(p, d.center) <= d.radius


def closest_point_on_segment(ax, ay, bx, by, px, py):
    """Closest point to (px, py) on the closed segment a-b."""
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        return ax, ay
    t = ((px - ax) * dx + (py - ay) * dy) / den
    if t <= 0.0:
        return ax, ay
    if t >= 1.0:
        return bx, by
    return ax + t * dx, ay + t * dy


def segment_point_distance(s: Segment2, p) -> float:
    cx, cy = closest_point_on_segment(s.a[0], s.a[1], s.b[0], s.b[1], p[0], p[1])
    return math.hypot(p[0] - cx, p[1] - cy)


def segment_intersects_disc(s: Segment2, d: Disc) -> bool:
    return segment_point_distance(s, d.center) <= d.radius


def discs_intersect(d1: Disc, d2: Disc) -> bool:
    return distance(d1.center, d2.center) <= d1.radius + d2.radius
