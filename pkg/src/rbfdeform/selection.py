"""Support-node selection: traditional greedy and grouped-circular greedy.

Both strategies grow a support set by repeatedly adding the boundary node
whose interpolation error is largest, until the error falls below a
tolerance. The traditional algorithm scans every boundary node each
iteration; the grouped-circular variant deals the boundary nodes into m
balanced groups and scans one group per iteration (cyclically), using the
group's local maximum as a stand-in for the global one. That cuts the
error-stage work per iteration from N_b * N_c kernel evaluations to
card(G_i) * N_c, i.e. by a factor of m.

All randomness goes through numpy's default_rng (PCG64), seeded and
reproducible across platforms.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    CholeskyState,
    SupportSet,
    _eval_displacements,
    _phi,
    _single_threaded_blas,
    evaluate_displacement,
    solve_support_weights,
)
from .errors import (
    EmptyGroupError,
    InvalidCountError,
    InvalidGroupCountError,
    NotPositiveDefiniteError,
    SelectionStalledError,
    TooFewBoundaryNodesError,
    UnknownIndexError,
)

# Candidates closer than this fraction of the radius to an existing support
# are rejected: the kernel matrix would be numerically singular.
NEAR_DUPLICATE_FRACTION = 1e-12


@dataclass(eq=False)
class BoundarySet:
    """Boundary nodes with their prescribed displacements.

    ``indices`` must be strictly increasing so "lowest boundary index"
    tie-breaks coincide with first-occurrence argmax over rows.
    """

    indices: np.ndarray
    points: np.ndarray
    disp: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        self.points = np.asarray(self.points, dtype=float)
        self.disp = np.asarray(self.disp, dtype=float)
        nb = len(self.indices)
        if nb == 0:
            raise ValueError("boundary set is empty")
        if self.points.shape != (nb, 3) or self.disp.shape != (nb, 3):
            raise ValueError(
                f"points {self.points.shape} and disp {self.disp.shape} "
                f"must both be ({nb}, 3)"
            )
        if nb > 1 and not (np.diff(self.indices) > 0).all():
            raise ValueError("boundary indices must be strictly increasing")
        if not np.isfinite(self.points).all() or not np.isfinite(self.disp).all():
            raise ValueError("boundary points and displacements must be finite")

    def __len__(self):
        return len(self.indices)

    def position_of(self, index):
        """Row of boundary node ``index``; UnknownIndexError if absent."""
        pos = int(np.searchsorted(self.indices, index))
        if pos == len(self.indices) or self.indices[pos] != index:
            raise UnknownIndexError(f"{index} is not a boundary node")
        return pos


@dataclass(eq=False)
class GroupPartition:
    """Boundary node ids dealt into m disjoint, balanced groups."""

    m: int
    groups: list
    seed: int

    def __post_init__(self):
        sizes = [len(g) for g in self.groups]
        if len(self.groups) != self.m or min(sizes) < 1:
            raise InvalidGroupCountError("partition must have m nonempty groups")
        if max(sizes) - min(sizes) > 1:
            raise InvalidGroupCountError("group sizes must differ by at most 1")
        merged = np.concatenate(self.groups)
        if len(np.unique(merged)) != len(merged):
            raise InvalidGroupCountError("groups must be disjoint")


@dataclass(frozen=True)
class SelectionConfig:
    """Tolerance, cap, grouping and reproducibility knobs for selection."""

    radius: float
    tol: float
    max_supports: int
    m: int = 1
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_supports < 3:
            raise ValueError(f"max_supports must be >= 3, got {self.max_supports}")
        if self.m < 1:
            raise InvalidGroupCountError(f"m must be >= 1, got {self.m}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class IterationRecord:
    """One group visit: what was scanned, found and paid for."""

    iteration: int
    group: int
    node: int
    local_max_error: float
    kernel_evals: int
    cum_kernel_evals: int
    t1_s: float
    t2_s: float


@dataclass(eq=False)
class SelectionHistory:
    """Per-iteration records plus the final verification sweep.

    ``final_sweep`` reuses the record layout with group = -1; its
    ``kernel_evals`` (and the cumulative column) include the sweep's own
    N_b * N_c evaluations, which :func:`error_stage_cost` excludes.
    ``t3_s`` is filled in by callers that run a volume evaluation.
    """

    records: list = field(default_factory=list)
    seed: int = 0
    m: int = 1
    final_sweep: IterationRecord | None = None
    t3_s: float | None = None


@dataclass(eq=False)
class SelectionResult:
    support: SupportSet
    history: SelectionHistory
    converged: bool


@dataclass
class KernelEvalCounter:
    """Mutable tally of error-stage kernel evaluations."""

    count: int = 0

    def add(self, n):
        self.count += int(n)


def partition_boundary(boundary, m, seed):
    """Deal a seeded uniform permutation of the boundary ids round-robin
    into m groups (sizes differ by at most 1)."""
    nb = len(boundary)
    if not 1 <= m <= nb:
        raise InvalidGroupCountError(f"m must be in [1, {nb}], got {m}")
    perm = np.random.default_rng(seed).permutation(nb)
    groups = [boundary.indices[perm[j::m]] for j in range(m)]
    return GroupPartition(m=m, groups=groups, seed=seed)


def seed_supports(boundary):
    """Deterministic initial triple of support-node ids.

    The node with the largest prescribed-displacement magnitude comes
    first, then two farthest-point picks (each maximizing the minimum
    distance to the nodes already chosen). Ties go to the lowest index.
    """
    return boundary.indices[_seed_positions(boundary)]


def _seed_positions(boundary):
    if len(boundary) < 3:
        raise TooFewBoundaryNodesError(
            f"need at least 3 boundary nodes, got {len(boundary)}"
        )
    mags = np.linalg.norm(boundary.disp, axis=1)
    chosen = [int(np.argmax(mags))]
    dmin = np.linalg.norm(boundary.points - boundary.points[chosen[0]], axis=1)
    for _ in range(2):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(
            dmin, np.linalg.norm(boundary.points - boundary.points[nxt], axis=1)
        )
    return chosen


def _errors_at(positions, boundary, support_points, weights, radius, workers=1):
    """Euclidean norms of (prescribed - interpolated) at boundary rows."""
    predicted = _eval_displacements(
        boundary.points[positions], support_points, weights, radius, workers
    )
    residual = boundary.disp[positions] - predicted
    return np.sqrt((residual * residual).sum(axis=1))


def interpolation_error(index, boundary, support, radius):
    """Euclidean norm of the 3-component residual at one boundary node."""
    pos = boundary.position_of(index)
    predicted = evaluate_displacement(boundary.points[pos], support, radius)
    return float(np.linalg.norm(boundary.disp[pos] - predicted))


def _argmax_lowest_id(errors, ids):
    """Row of the maximum, ties broken by the smallest id."""
    best = np.flatnonzero(errors == errors.max())
    return int(best[np.argmin(ids[best])])


def group_arg_max_error(group, boundary, support, radius, counter=None):
    """Node id with the largest interpolation error in ``group``.

    Returns ``(node_id, error)``. When given, ``counter`` is advanced by
    card(group) * n_supports, the number of kernel evaluations this scan
    costs.
    """
    group = np.asarray(group, dtype=np.intp)
    if len(group) == 0:
        raise EmptyGroupError("group is empty")
    positions = np.searchsorted(boundary.indices, group)
    errors = _errors_at(
        positions, boundary, support.points, support.weights, radius
    )
    if counter is not None:
        counter.add(len(group) * len(support))
    row = _argmax_lowest_id(errors, group)
    return int(group[row]), float(errors[row])


def gcb_select(boundary, config):
    """Grouped-circular greedy support selection.

    Boundary ids are dealt into ``config.m`` groups; iteration k solves the
    current weights, scans group ``k mod m`` and adds the group's worst node
    when its error exceeds the tolerance. Candidates that would make the
    kernel matrix singular are skipped (marked ineligible) in favor of the
    group's next-largest error. The loop stops once m consecutive visits
    stay within tolerance, when the support count hits
    ``config.max_supports``, or with :class:`SelectionStalledError` if
    over-tolerance errors remain but nothing is addable. A final sweep over
    all boundary nodes is recorded and sets ``converged``.
    """
    with _single_threaded_blas():
        return _gcb_run(boundary, config)


def _gcb_run(boundary, config):
    nb = len(boundary)
    m = config.m
    if m > nb:
        raise InvalidGroupCountError(f"m must be in [1, {nb}], got {m}")
    radius = config.radius
    partition = partition_boundary(boundary, m, config.seed)
    position_groups = [
        np.searchsorted(boundary.indices, g) for g in partition.groups
    ]

    selected = []
    ineligible = np.zeros(nb, dtype=bool)
    state = CholeskyState()
    for pos in _seed_positions(boundary):
        distances = (
            cdist(boundary.points[pos][None, :], boundary.points[selected])[0]
            if selected
            else np.empty(0)
        )
        # Coincident seeds surface here as a non-positive pivot.
        state.append(np.append(_phi(distances / radius), 1.0))
        selected.append(pos)
        ineligible[pos] = True
    support_points = boundary.points[selected]

    history = SelectionHistory(seed=config.seed, m=m)
    weights = None
    dirty = True
    t2_carry = 0.0
    cum_evals = 0
    streak_ok = 0
    streak_noadd = 0
    k = 3

    while len(selected) < config.max_supports:
        t2 = t2_carry
        t2_carry = 0.0
        if dirty:
            t0 = time.perf_counter()
            weights = state.solve(boundary.disp[selected])
            t2 += time.perf_counter() - t0
            dirty = False

        i = k % m
        group_ids = partition.groups[i]
        group_pos = position_groups[i]
        t0 = time.perf_counter()
        errors = _errors_at(
            group_pos, boundary, support_points, weights, radius, config.workers
        )
        t1 = time.perf_counter() - t0
        evals = len(group_ids) * len(selected)
        cum_evals += evals

        best_row = _argmax_lowest_id(errors, group_ids)
        local_max = float(errors[best_row])
        added_pos = None
        if local_max > config.tol:
            t0 = time.perf_counter()
            # Descending error, ties to the lowest id; try until one sticks.
            for row in np.lexsort((group_ids, -errors)):
                if errors[row] <= config.tol:
                    break
                pos = int(group_pos[row])
                if ineligible[pos]:
                    continue
                point = boundary.points[pos]
                distances = cdist(point[None, :], support_points)[0]
                if distances.min() < NEAR_DUPLICATE_FRACTION * radius:
                    ineligible[pos] = True
                    continue
                try:
                    state.append(np.append(_phi(distances / radius), 1.0))
                except NotPositiveDefiniteError:
                    ineligible[pos] = True
                    continue
                selected.append(pos)
                ineligible[pos] = True
                support_points = boundary.points[selected]
                added_pos = pos
                dirty = True
                break
            t2_carry += time.perf_counter() - t0

        node_pos = added_pos if added_pos is not None else int(group_pos[best_row])
        history.records.append(
            IterationRecord(
                iteration=k,
                group=i,
                node=int(boundary.indices[node_pos]),
                local_max_error=local_max,
                kernel_evals=evals,
                cum_kernel_evals=cum_evals,
                t1_s=t1,
                t2_s=t2,
            )
        )

        if added_pos is None:
            streak_noadd += 1
            streak_ok = streak_ok + 1 if local_max <= config.tol else 0
            if streak_ok >= m:
                break
            if streak_noadd >= m:
                raise SelectionStalledError(
                    "errors above tolerance remain but no group has an "
                    "addable candidate"
                )
        else:
            streak_noadd = 0
            streak_ok = 0
        k += 1

    # Final verification sweep against the final support set.
    t2 = t2_carry
    if dirty:
        t0 = time.perf_counter()
        weights = state.solve(boundary.disp[selected])
        t2 += time.perf_counter() - t0
    t0 = time.perf_counter()
    all_errors = _errors_at(
        np.arange(nb), boundary, support_points, weights, radius, config.workers
    )
    t_sweep = time.perf_counter() - t0
    sweep_evals = nb * len(selected)
    cum_evals += sweep_evals
    worst = _argmax_lowest_id(all_errors, boundary.indices)
    global_max = float(all_errors[worst])
    history.final_sweep = IterationRecord(
        iteration=k + 1,
        group=-1,
        node=int(boundary.indices[worst]),
        local_max_error=global_max,
        kernel_evals=sweep_evals,
        cum_kernel_evals=cum_evals,
        t1_s=t_sweep,
        t2_s=t2,
    )

    support = SupportSet(
        nodes=boundary.indices[selected],
        points=boundary.points[selected],
        weights=weights,
    )
    return SelectionResult(
        support=support, history=history, converged=global_max <= config.tol
    )


def greedy_select(boundary, config):
    """Traditional greedy selection: the m = 1 case of :func:`gcb_select`
    (one group holding every boundary node, global arg-max each iteration).
    Kept as a named entry point for benchmarking."""
    return gcb_select(boundary, replace(config, m=1))


def random_select(boundary, n, seed, radius):
    """Support set of n ids drawn uniformly without replacement (seeded),
    with weights solved for the prescribed displacements."""
    nb = len(boundary)
    if not 3 <= n <= nb:
        raise InvalidCountError(f"n must be in [3, {nb}], got {n}")
    positions = np.random.default_rng(seed).choice(nb, size=n, replace=False)
    points = boundary.points[positions]
    weights = solve_support_weights(points, boundary.disp[positions], radius)
    return SupportSet(
        nodes=boundary.indices[positions], points=points, weights=weights
    )


def error_stage_cost(history):
    """Cumulative error-stage kernel evaluations over the per-iteration
    records (the final verification sweep is not included)."""
    return sum(r.kernel_evals for r in history.records)
