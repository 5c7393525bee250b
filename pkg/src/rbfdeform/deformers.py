"""Analytic displacement prescriptions and file-based prescription.

Both analytic modes displace in the x-y plane only (dz = 0) and vary along
the span coordinate z. Angles cross the API in degrees.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SourceMismatchError


@dataclass(frozen=True)
class BendTwistParams:
    """Coupled bending-twisting deformation parameters.

    ``b`` is the root-chord length, ``theta_m`` the maximum twist angle in
    degrees, and (``x0``, ``y0``) the pivot of the z-parallel twist axis.
    """

    b: float
    theta_m: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError(f"b must be positive, got {self.b}")


@dataclass(frozen=True)
class SpanSineParams:
    """Spanwise sinusoidal bending parameters.

    ``b`` is the span length and ``c`` the mean aerodynamic chord length.
    """

    b: float
    c: float

    def __post_init__(self):
        if self.b <= 0 or self.c <= 0:
            raise ValueError(f"b and c must be positive, got b={self.b}, c={self.c}")


def bend_twist(points, params):
    """Bending-twisting displacement at `points`, shape matching the input.

    Each point is rotated in the x-y plane about (x0, y0) by the spanwise
    twist angle ``theta_m * sin(pi*z/(2b))``, then the bending deflection
    ``0.05 * z * sin(pi*z/(2b))`` is added to y. z is unchanged. The twist
    is applied before the bend; the pivot is a fixed z-parallel axis.
    """
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    z = points[:, 2]
    s = np.sin(np.pi * z / (2.0 * params.b))
    theta = np.radians(params.theta_m * s)
    dx_pivot = points[:, 0] - params.x0
    dy_pivot = points[:, 1] - params.y0
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    out = np.zeros_like(points)
    out[:, 0] = (cos_t * dx_pivot - sin_t * dy_pivot) - dx_pivot
    out[:, 1] = (sin_t * dx_pivot + cos_t * dy_pivot) - dy_pivot + 0.05 * z * s
    return out[0] if single else out


def span_sine(points, params):
    """Spanwise sinusoid: dy = 0.3*c*(z^2/b^2)*sin(8*pi*z/b), dx = dz = 0."""
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    z = points[:, 2]
    out = np.zeros_like(points)
    out[:, 1] = 0.3 * params.c * (z / params.b) ** 2 * np.sin(8.0 * np.pi * z / params.b)
    return out[0] if single else out


def prescribe(boundary_points, deformer=None, field=None):
    """Displacement field over the boundary from exactly one source.

    ``deformer`` is a callable mapping (n, 3) points to (n, 3)
    displacements (e.g. a partial of :func:`bend_twist`); ``field`` is a
    ready (n, 3) array, typically loaded from a displacement file. The
    result is aligned with the boundary-point order.
    """
    if (deformer is None) == (field is None):
        raise SourceMismatchError("exactly one of deformer or field is required")
    boundary_points = np.asarray(boundary_points, dtype=float).reshape(-1, 3)
    if deformer is not None:
        disp = np.asarray(deformer(boundary_points), dtype=float)
    else:
        disp = np.asarray(field, dtype=float)
    if disp.shape != boundary_points.shape:
        raise SourceMismatchError(
            f"displacement source has shape {disp.shape}, "
            f"boundary has {boundary_points.shape}"
        )
    return disp
