"""Compactly supported RBF interpolation core.

The interpolant is a weighted sum of Wendland C2 kernels centered on support
nodes. Solving for the weights goes through a growing Cholesky factor of the
kernel matrix so that adding one support node costs O(n^2) instead of a full
O(n^3) refactorization.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist
from threadpoolctl import threadpool_limits

from .errors import (
    DimensionMismatchError,
    DuplicateNodesError,
    EmptySupportSetError,
    NotPositiveDefiniteError,
)

# Rows per evaluation chunk. Fixed (not derived from the worker count) so that
# results are bit-identical no matter how many workers split the chunks.
_CHUNK = 2048
# Support columns per evaluation tile. Keeping every temporary at a fixed
# (chunk, tile) shape lets the allocator reuse buffers across the thousands
# of slightly-grown evaluations a selection run makes; fresh first-touch
# pages are far more expensive than the arithmetic here.
_TILE = 512
# Triangular solves are padded to this granularity (identity diagonal, zero
# right-hand side) for the same reason; the padded rows solve to zero and
# leave the real solution untouched.
_SOLVE_BLOCK = 256


def _single_threaded_blas():
    """BLAS threading hurts badly here: the inner matrices are small, and
    spinning BLAS workers starve the actual work on shared cores. Our own
    ``workers`` knob is the parallelism interface."""
    return threadpool_limits(limits=1, user_api="blas")


def _phi(eta):
    """Wendland C2 on precomputed nonnegative eta, no input checks."""
    t = np.maximum(1.0 - eta, 0.0)
    t *= t
    t *= t
    return t * (4.0 * eta + 1.0)


def wendland_c2(eta):
    """Evaluate the Wendland C2 kernel at normalized distance ``eta``.

    Returns ``(1 - eta)**4 * (4*eta + 1)`` for ``eta <= 1`` and exactly 0
    beyond (the two branches agree at ``eta == 1``). Values lie in [0, 1].

    Parameters
    ----------
    eta : float or array
        Nonnegative distance(s) already divided by the kernel radius.
    """
    eta = np.asarray(eta, dtype=float)
    if np.isnan(eta).any():
        raise ValueError("eta must not contain NaN")
    if (eta < 0).any():
        raise ValueError("eta must be nonnegative")
    out = _phi(eta)
    return float(out) if out.ndim == 0 else out


def normalized_distance(a, b, radius):
    """Euclidean distance between two points divided by the kernel radius."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / radius)


def kernel_matrix(points_a, points_b, radius):
    """Kernel values between two point sets, shape (len(a), len(b))."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    points_a = np.asarray(points_a, dtype=float)
    points_b = np.asarray(points_b, dtype=float)
    return _phi(cdist(points_a, points_b) / radius)


def assemble_phi(points, radius):
    """Assemble the symmetric kernel matrix over one point set.

    The result has a unit diagonal and is exactly symmetric (the upper
    triangle is mirrored). Coincident points would make it singular and are
    rejected.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dist = cdist(points, points)
    n = len(points)
    if n > 1:
        offdiag = dist + np.diag(np.full(n, np.inf))
        i, j = np.unravel_index(np.argmin(offdiag), dist.shape)
        if offdiag[i, j] == 0.0:
            raise DuplicateNodesError(f"points {min(i, j)} and {max(i, j)} coincide")
    phi = _phi(dist / radius)
    upper = np.triu(phi, 1)
    phi = upper + upper.T
    np.fill_diagonal(phi, 1.0)
    return phi


@dataclass(eq=False)
class CholeskyState:
    """Growing lower-triangular Cholesky factor of an SPD matrix.

    Rows are appended one at a time via :meth:`append`; each append costs
    O(order^2). ``L @ L.T`` reproduces the factored matrix.

    Internally the factor lives in a capacity buffer whose unused trailing
    diagonal is 1, so substitutions can run on a block-rounded size with
    zero-padded right-hand sides (padded rows solve to exactly zero).
    """

    _L: np.ndarray = field(default_factory=lambda: np.eye(8))
    _n: int = 0

    @property
    def order(self):
        return self._n

    @property
    def factor(self):
        """Copy of the current (order, order) lower-triangular factor."""
        return self._L[: self._n, : self._n].copy()

    def _solve_size(self):
        cap = self._L.shape[0]
        if cap <= _SOLVE_BLOCK:
            return cap
        return min(-(-self._n // _SOLVE_BLOCK) * _SOLVE_BLOCK, cap)

    def _forward(self, rhs_full, width=None):
        """Forward substitution on the block-rounded system."""
        s = self._solve_size()
        shape = (s,) if width is None else (s, width)
        buf = np.zeros(shape)
        buf[: self._n] = rhs_full
        return solve_triangular(self._L[:s, :s], buf, lower=True, check_finite=False)

    def append(self, new_row):
        """Grow the factor by the next row of the symmetric matrix.

        ``new_row`` holds the matrix entries of the new index against all
        prior indices plus itself (length ``order + 1``). Raises
        :class:`NotPositiveDefiniteError` if the new diagonal pivot is not
        strictly positive; the state is left unchanged in that case.
        """
        new_row = np.asarray(new_row, dtype=float)
        n = self._n
        if new_row.shape != (n + 1,):
            raise DimensionMismatchError(
                f"expected row of length {n + 1}, got shape {new_row.shape}"
            )
        if n == 0:
            cross = np.empty(0)
            pivot2 = new_row[0]
        else:
            cross = self._forward(new_row[:n])[:n]
            pivot2 = new_row[n] - cross @ cross
        if not pivot2 > 0.0:
            raise NotPositiveDefiniteError(
                f"pivot^2 = {pivot2:.3e} appending row {n}; "
                "support nodes may coincide or be nearly coincident"
            )
        if n + 1 > self._L.shape[0]:
            grown = np.eye(2 * self._L.shape[0])
            grown[:n, :n] = self._L[:n, :n]
            self._L = grown
        self._L[n, :n] = cross
        self._L[n, n] = np.sqrt(pivot2)
        self._n = n + 1
        return self

    def solve(self, rhs):
        """Solve ``(L @ L.T) x = rhs`` by forward/back substitution.

        ``rhs`` may be (order,) or (order, k); the shape is preserved.
        """
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[:1] != (self._n,):
            raise DimensionMismatchError(
                f"rhs has leading dimension {rhs.shape[:1]}, factor order is {self._n}"
            )
        if self._n == 0:
            return rhs.copy()
        width = rhs.shape[1] if rhs.ndim == 2 else None
        y = self._forward(rhs, width)
        s = len(y)
        x = solve_triangular(
            self._L[:s, :s], y, lower=True, trans="T", check_finite=False
        )
        return x[: self._n]


def cholesky_append(state, new_row):
    """Functional spelling of :meth:`CholeskyState.append` (mutates state)."""
    return state.append(new_row)


def solve_weights(state, displacements):
    """Solve the factored kernel system for per-component weights.

    ``displacements`` is (order, 3) with columns dx, dy, dz; the returned
    weights have the same layout.
    """
    displacements = np.asarray(displacements, dtype=float)
    if displacements.ndim != 2 or displacements.shape[1] != 3:
        raise DimensionMismatchError(
            f"displacements must be (order, 3), got {displacements.shape}"
        )
    return state.solve(displacements)


@dataclass(eq=False)
class SupportSet:
    """Selected support nodes with their interpolation weights.

    ``nodes`` are boundary-node ids in selection order, ``points`` their
    positions and ``weights`` the (n, 3) per-component weight vectors.
    """

    nodes: np.ndarray
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.intp)
        self.points = np.asarray(self.points, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        n = len(self.nodes)
        if len(np.unique(self.nodes)) != n:
            raise ValueError("support node ids must be unique")
        if self.points.shape != (n, 3) or self.weights.shape != (n, 3):
            raise DimensionMismatchError(
                f"points {self.points.shape} and weights {self.weights.shape} "
                f"must both be ({n}, 3)"
            )

    def __len__(self):
        return len(self.nodes)

    @property
    def wx(self):
        return self.weights[:, 0]

    @property
    def wy(self):
        return self.weights[:, 1]

    @property
    def wz(self):
        return self.weights[:, 2]


def solve_support_weights(points, displacements, radius):
    """Factor the kernel matrix of ``points`` and solve for weights.

    Builds the factor row by row (same path the selection loop uses) and
    returns (n, 3) weights for the prescribed (n, 3) displacements.
    """
    points = np.asarray(points, dtype=float)
    displacements = np.asarray(displacements, dtype=float)
    state = CholeskyState()
    with _single_threaded_blas():
        for k in range(len(points)):
            row = kernel_matrix(points[k : k + 1], points[: k + 1], radius)[0]
            state.append(row)
        return solve_weights(state, displacements)


def _pad_supports(points, support_points, weights, radius):
    """Pad the support arrays to a tile multiple with zero-weight sentinel
    points placed farther than the radius from every evaluation point, so
    the padding contributes exactly zero."""
    k = len(support_points)
    pad = -k % _TILE
    if pad == 0:
        return support_points, weights
    bound = max(
        float(np.abs(support_points).max()) if k else 0.0,
        float(np.abs(points).max()) if len(points) else 0.0,
        1.0,
    )
    sentinel = np.full((pad, 3), bound + 2.0 * radius)
    return np.vstack([support_points, sentinel]), np.vstack([weights, np.zeros((pad, 3))])


def _eval_displacements(points, support_points, weights, radius, workers=1):
    """Tiled kernel-weighted sum; bit-identical for any worker count.

    Chunk and tile sizes are fixed constants, so every temporary has a
    recurring shape (cheap to reallocate) and the work split never depends
    on the worker count.
    """
    n = len(points)
    out = np.zeros((n, 3))
    spts, w = _pad_supports(points, support_points, weights, radius)
    spans = [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]

    def run(span):
        lo, hi = span
        block = points[lo:hi]
        for c in range(0, len(spts), _TILE):
            # Same per-element operation chain as _phi, with reused buffers.
            eta = cdist(block, spts[c : c + _TILE])
            eta /= radius
            t = np.maximum(1.0 - eta, 0.0)
            t *= t
            t *= t
            eta *= 4.0
            eta += 1.0
            t *= eta
            out[lo:hi] += t @ w[c : c + _TILE]

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, spans))
    else:
        for span in spans:
            run(span)
    return out


def evaluate_displacements(points, support, radius, workers=1):
    """Interpolated displacements at many points, shape (n, 3).

    Each component is ``sum_i w_i * phi(|p - r_i| / radius)``; supports
    farther than the radius contribute exactly zero.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if len(support) == 0:
        raise EmptySupportSetError("support set is empty")
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    with _single_threaded_blas():
        return _eval_displacements(
            points, support.points, support.weights, radius, workers
        )


def evaluate_displacement(p, support, radius):
    """Interpolated displacement at a single point, shape (3,)."""
    return evaluate_displacements(np.asarray(p, dtype=float)[None, :], support, radius)[0]


def deform_points(points, support, radius, workers=1):
    """Return ``points`` shifted by their interpolated displacements.

    Pure function of its inputs; output order equals input order.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        return points.copy()
    return points + evaluate_displacements(points, support, radius, workers)
