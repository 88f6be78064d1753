"""Straight-line re-implementation of the spatial relation rules.

Written separately from the package kernels: containment, IoU and distance are
evaluated in exact rational arithmetic on the float inputs, and the sector
comes from atan2 in degrees.
"""
import math
from fractions import Fraction


def brute_force_class(a, b):
    ax1, ay1, ax2, ay2 = (Fraction(v) for v in a)
    bx1, by1, bx2, by2 = (Fraction(v) for v in b)
    same = (ax1, ay1, ax2, ay2) == (bx1, by1, bx2, by2)
    if not same and ax1 <= bx1 and ay1 <= by1 and bx2 <= ax2 and by2 <= ay2:
        return 1
    if not same and bx1 <= ax1 and by1 <= ay1 and ax2 <= bx2 and ay2 <= by2:
        return 2
    w = min(ax2, bx2) - max(ax1, bx1)
    h = min(ay2, by2) - max(ay1, by1)
    inter = w * h if w > 0 and h > 0 else Fraction(0)
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if inter / union > Fraction(1, 2):
        return 3
    dx = (bx1 + bx2) / 2 - (ax1 + ax2) / 2
    dy = -((by1 + by2) / 2 - (ay1 + ay2) / 2)
    if dx == 0 and dy == 0:
        return 3
    if dx * dx + dy * dy > Fraction(1, 2):  # phi > 0.5 with phi = d / sqrt(2)
        return None
    theta = _exact_angle(dx, dy)
    if theta is None:
        theta = math.degrees(math.atan2(float(dy), float(dx))) % 360.0
    return math.floor(theta / 45.0) + 4


def _exact_angle(dx, dy):
    # atan2 in degrees rounds near the sector borders; pin the borders exactly
    if dy == 0:
        return 0.0 if dx > 0 else 180.0
    if dx == 0:
        return 90.0 if dy > 0 else 270.0
    if abs(dx) == abs(dy):
        return {(1, 1): 45.0, (-1, 1): 135.0, (-1, -1): 225.0, (1, -1): 315.0}[(_sign(dx), _sign(dy))]
    return None


def _sign(v):
    return 1 if v > 0 else -1
