"""Analysis metrics: support-distribution KL divergence, interpolation-error
summaries and histories, and interior-angle surface-cell quality."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .core import SupportSet, _single_threaded_blas, assemble_phi
from .errors import DegenerateCellError, EmptySupportSetError
from .selection import _argmax_lowest_id, _errors_at

# Floor for the reference distance in the KL ratio; distances of exactly
# zero occur whenever a boundary node is itself a support of the other set.
KL_DISTANCE_FLOOR = 1e-12

QUALITY_BIN_WIDTH = 0.05


@dataclass(eq=False)
class ErrorSummary:
    """Maximum and RMS interpolation error over the boundary."""

    max_error: float
    rms_error: float
    node_of_max: int


@dataclass(eq=False)
class QualityReport:
    """Per-cell quality values with aggregates.

    ``histogram`` counts cells in bins of width 0.05 over [0, 1]; values
    below zero land in the lowest bin so the counts always sum to the cell
    count. ``q_min``/``q_mean`` use the raw (unclipped) values.
    """

    q: np.ndarray
    q_min: float
    q_mean: float
    histogram: np.ndarray


def _nearest_distances(support, boundary):
    if len(support) == 0:
        raise EmptySupportSetError("support set is empty")
    return cdist(boundary.points, support.points).min(axis=1)


def nearest_support_distance(index, support, boundary):
    """Distance from boundary node ``index`` to the closest support node.

    Brute-force scan over the support set (the defining computation),
    bit-identical to the vectorized all-nodes scan used by the KL metric.
    """
    if len(support) == 0:
        raise EmptySupportSetError("support set is empty")
    pos = boundary.position_of(index)
    return float(cdist(boundary.points[pos][None, :], support.points).min())


def kl_divergence(s1, s2, boundary):
    """Divergence between two support distributions over the boundary.

    Sums ``d1 * log(d1 / d2)`` over all boundary nodes, where d1/d2 are the
    nearest-support distances under each set. Natural logarithm; terms with
    d1 = 0 contribute nothing and d2 is floored at 1e-12. Zero when the two
    sets cover the boundary identically; smaller means more alike.
    """
    d1 = _nearest_distances(s1, boundary)
    d2 = np.maximum(_nearest_distances(s2, boundary), KL_DISTANCE_FLOOR)
    mask = d1 > 0.0
    return float(np.sum(d1[mask] * np.log(d1[mask] / d2[mask])))


def error_summary(boundary, support, radius):
    """Scan every boundary node and summarize the interpolation residuals."""
    errors = _errors_at(
        np.arange(len(boundary)), boundary, support.points, support.weights, radius
    )
    worst = _argmax_lowest_id(errors, boundary.indices)
    rms = float(np.sqrt(np.mean(errors * errors)))
    return ErrorSummary(
        max_error=float(errors[worst]),
        rms_error=rms,
        node_of_max=int(boundary.indices[worst]),
    )


def error_history(boundary, support_nodes, radius, every=50):
    """Error summaries at prefixes of a selection's support sequence.

    For each sampled support count n (every ``every`` nodes, plus the full
    length), weights are re-solved for the first n nodes (one-shot dense
    factorization; cheaper than replaying the incremental appends) and the
    boundary is fully scanned. Returns a list of ``(n, ErrorSummary)``.
    This is a post-hoc reconstruction, so it leaves selection
    instrumentation counters untouched.
    """
    support_nodes = np.asarray(support_nodes, dtype=np.intp)
    total = len(support_nodes)
    counts = list(range(every, total, every))
    if not counts or counts[-1] != total:
        counts.append(total)
    positions = np.searchsorted(boundary.indices, support_nodes)
    out = []
    with _single_threaded_blas():
        for n in counts:
            pts = boundary.points[positions[:n]]
            factor = cho_factor(assemble_phi(pts, radius), lower=True)
            weights = cho_solve(factor, boundary.disp[positions[:n]])
            prefix = SupportSet(nodes=support_nodes[:n], points=pts, weights=weights)
            out.append((n, error_summary(boundary, prefix, radius)))
    return out


def cell_quality(cell, positions):
    """Interior-angle quality of a 3- or 4-vertex surface cell.

    With a the ideal regular-polygon angle (60 deg for triangles, 90 deg
    for quadrilaterals) and a_max/a_min the cell's extreme interior angles,
    returns ``1 - max((a_max - a)/(180 - a), (a - a_min)/a)``. 1 means the
    cell is a regular polygon; values can go negative for badly distorted
    cells. Angles are measured from the 3-D vertex positions.
    """
    cell = np.asarray(cell, dtype=np.intp)
    k = len(cell)
    if k not in (3, 4):
        raise DegenerateCellError(f"cells must have 3 or 4 vertices, got {k}")
    verts = np.asarray(positions, dtype=float)[cell]
    for a in range(k):
        for b in range(a + 1, k):
            if np.array_equal(verts[a], verts[b]):
                raise DegenerateCellError(
                    f"cell vertices {a} and {b} coincide at {verts[a]}"
                )
    angles = np.empty(k)
    for v in range(k):
        e1 = verts[(v - 1) % k] - verts[v]
        e2 = verts[(v + 1) % k] - verts[v]
        cosang = np.dot(e1, e2) / (np.linalg.norm(e1) * np.linalg.norm(e2))
        angles[v] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    ideal = 60.0 if k == 3 else 90.0
    penalty = max(
        (angles.max() - ideal) / (180.0 - ideal), (ideal - angles.min()) / ideal
    )
    return float(1.0 - penalty)


def quality_report(cells, positions):
    """Per-cell quality plus aggregates for a list of surface cells.

    Cell order is preserved; a degenerate cell raises with its cell id.
    """
    q = np.empty(len(cells))
    for e, cell in enumerate(cells):
        try:
            q[e] = cell_quality(cell, positions)
        except DegenerateCellError as err:
            raise DegenerateCellError(f"cell {e}: {err}") from err
    edges = np.arange(0.0, 1.0 + QUALITY_BIN_WIDTH / 2, QUALITY_BIN_WIDTH)
    hist, _ = np.histogram(np.clip(q, 0.0, 1.0), bins=edges)
    return QualityReport(
        q=q,
        q_min=float(q.min()) if len(q) else float("nan"),
        q_mean=float(q.mean()) if len(q) else float("nan"),
        histogram=hist,
    )
