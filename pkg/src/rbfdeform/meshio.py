"""Text formats: MDK1 meshes, MDK1-DISP displacement fields, history and
support-set CSVs.

All writers emit a canonical form: fixed field order, 17-significant-digit
decimals, "\\n" newlines. Reading a canonical file and writing it again
reproduces it byte for byte. ``#`` starts a comment, blank lines are
ignored, and every parse failure carries a 1-based line number.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DuplicateNodeError,
    InvariantViolationError,
    MissingNodeError,
    ParseError,
)
from .selection import BoundarySet, IterationRecord, SelectionHistory


def _fmt(x):
    """Round-trip-exact decimal with 17 significant digits."""
    return f"{x:.17g}"


@dataclass(eq=False)
class Mesh:
    """Nodes, boundary membership and optional surface cells.

    Node ids are positions in ``nodes``. ``boundary`` is sorted and unique.
    Volume connectivity is deliberately not stored; the interpolation needs
    none. ``cells`` (triangles or quadrilaterals over node ids) exist only
    for surface-quality metrics.
    """

    nodes: np.ndarray
    boundary: np.ndarray
    cells: list = field(default_factory=list)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.boundary = np.asarray(self.boundary, dtype=np.intp)
        self.cells = [np.asarray(c, dtype=np.intp) for c in self.cells]
        nv = len(self.nodes)
        if not np.isfinite(self.nodes).all():
            raise ValueError("node coordinates must be finite")
        if len(self.boundary) != len(np.unique(self.boundary)):
            raise ValueError("boundary indices must be unique")
        self.boundary = np.sort(self.boundary)
        if len(self.boundary) and (
            self.boundary[0] < 0 or self.boundary[-1] >= nv
        ):
            raise ValueError("boundary indices out of range")
        for c in self.cells:
            if len(c) not in (3, 4):
                raise ValueError(f"cells must have 3 or 4 vertices, got {len(c)}")
            if c.min() < 0 or c.max() >= nv:
                raise ValueError("cell indices out of range")

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_boundary(self):
        return len(self.boundary)

    def boundary_points(self):
        return self.nodes[self.boundary]

    def boundary_set(self, disp):
        """BoundarySet over this mesh's wall nodes for a given (N_b, 3)
        displacement field."""
        return BoundarySet(
            indices=self.boundary, points=self.boundary_points(), disp=disp
        )


class _Lines:
    """Comment-stripped, non-blank lines with their 1-based numbers."""

    def __init__(self, stream):
        if not hasattr(stream, "read"):
            stream = io.StringIO(stream)
        self.items = []
        for lineno, raw in enumerate(stream, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                self.items.append((lineno, text.split()))
        self.pos = 0
        self.last_line = self.items[-1][0] if self.items else 0

    def next(self, what):
        if self.pos >= len(self.items):
            raise ParseError(self.last_line + 1, f"unexpected end of file, expected {what}")
        item = self.items[self.pos]
        self.pos += 1
        return item

    def expect_end(self):
        if self.pos < len(self.items):
            lineno, tokens = self.items[self.pos]
            raise ParseError(lineno, f"unexpected trailing content {' '.join(tokens)!r}")


def _parse_int(token, lineno, what):
    try:
        return int(token)
    except ValueError:
        raise ParseError(lineno, f"expected integer {what}, got {token!r}") from None


def _parse_float(token, lineno, what):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(lineno, f"expected number {what}, got {token!r}") from None
    if not np.isfinite(value):
        raise InvariantViolationError(lineno, f"{what} must be finite, got {token!r}")
    return value


def _parse_count(lines, keyword):
    lineno, tokens = lines.next(f"{keyword} <count>")
    if len(tokens) != 2 or tokens[0] != keyword:
        raise ParseError(lineno, f"expected '{keyword} <count>', got {' '.join(tokens)!r}")
    count = _parse_int(tokens[1], lineno, f"{keyword} count")
    if count < 0:
        raise ParseError(lineno, f"{keyword} count must be nonnegative, got {count}")
    return count


def read_mesh(stream):
    """Parse an MDK1 mesh from a text stream (or a string of its content)."""
    lines = _Lines(stream)
    lineno, tokens = lines.next("MDK1 header")
    if tokens != ["MDK1"]:
        raise ParseError(lineno, f"expected 'MDK1' header, got {' '.join(tokens)!r}")

    nv = _parse_count(lines, "NODES")
    nodes = np.empty((nv, 3))
    for i in range(nv):
        lineno, tokens = lines.next(f"coordinates of node {i}")
        if len(tokens) != 3:
            raise ParseError(lineno, f"expected 3 coordinates, got {len(tokens)}")
        nodes[i] = [_parse_float(t, lineno, "coordinate") for t in tokens]

    nb = _parse_count(lines, "BOUNDARY")
    boundary = np.empty(nb, dtype=np.intp)
    seen = set()
    for i in range(nb):
        lineno, tokens = lines.next(f"boundary node {i}")
        if len(tokens) != 1:
            raise ParseError(lineno, f"expected 1 node index, got {len(tokens)}")
        idx = _parse_int(tokens[0], lineno, "boundary node index")
        if not 0 <= idx < nv:
            raise InvariantViolationError(
                lineno, f"boundary index {idx} outside [0, {nv})"
            )
        if idx in seen:
            raise InvariantViolationError(lineno, f"duplicate boundary index {idx}")
        seen.add(idx)
        boundary[i] = idx

    ne = _parse_count(lines, "CELLS")
    cells = []
    for i in range(ne):
        lineno, tokens = lines.next(f"cell {i}")
        k = _parse_int(tokens[0], lineno, "cell arity")
        if k not in (3, 4):
            raise InvariantViolationError(lineno, f"cell arity must be 3 or 4, got {k}")
        if len(tokens) != k + 1:
            raise ParseError(
                lineno, f"cell of arity {k} needs {k} indices, got {len(tokens) - 1}"
            )
        cell = [_parse_int(t, lineno, "cell node index") for t in tokens[1:]]
        for idx in cell:
            if not 0 <= idx < nv:
                raise InvariantViolationError(
                    lineno, f"cell index {idx} outside [0, {nv})"
                )
        cells.append(np.array(cell, dtype=np.intp))

    lines.expect_end()
    return Mesh(nodes=nodes, boundary=boundary, cells=cells)


def write_mesh(mesh):
    """Serialize a mesh to canonical MDK1 text."""
    out = ["MDK1", f"NODES {mesh.n_nodes}"]
    out.extend(" ".join(_fmt(c) for c in row) for row in mesh.nodes)
    out.append(f"BOUNDARY {mesh.n_boundary}")
    out.extend(str(i) for i in mesh.boundary)
    out.append(f"CELLS {len(mesh.cells)}")
    out.extend(f"{len(c)} " + " ".join(str(i) for i in c) for c in mesh.cells)
    return "\n".join(out) + "\n"


def read_displacements(stream, boundary):
    """Parse an MDK1-DISP file for the given boundary indices.

    Returns an (N_b, 3) array aligned with ``boundary`` order. Every
    boundary index must appear exactly once.
    """
    boundary = np.asarray(boundary, dtype=np.intp)
    lines = _Lines(stream)
    lineno, tokens = lines.next("MDK1-DISP header")
    if tokens != ["MDK1-DISP"]:
        raise ParseError(lineno, f"expected 'MDK1-DISP' header, got {' '.join(tokens)!r}")
    disp = np.zeros((len(boundary), 3))
    filled = np.zeros(len(boundary), dtype=bool)
    while lines.pos < len(lines.items):
        lineno, tokens = lines.next("displacement line")
        if len(tokens) != 4:
            raise ParseError(
                lineno, f"expected 'node dx dy dz', got {len(tokens)} fields"
            )
        idx = _parse_int(tokens[0], lineno, "node index")
        pos = int(np.searchsorted(boundary, idx))
        if pos == len(boundary) or boundary[pos] != idx:
            raise ParseError(lineno, f"node {idx} is not a boundary node")
        if filled[pos]:
            raise DuplicateNodeError(f"line {lineno}: duplicate node {idx}")
        filled[pos] = True
        disp[pos] = [_parse_float(t, lineno, "displacement") for t in tokens[1:]]
    if not filled.all():
        missing = boundary[~filled]
        raise MissingNodeError(
            f"missing displacement for {len(missing)} boundary nodes "
            f"(first: {missing[0]})"
        )
    return disp


def write_displacements(disp, boundary):
    """Serialize a displacement field to canonical MDK1-DISP text."""
    boundary = np.asarray(boundary, dtype=np.intp)
    disp = np.asarray(disp, dtype=float)
    out = ["MDK1-DISP"]
    out.extend(
        f"{idx} " + " ".join(_fmt(c) for c in row)
        for idx, row in zip(boundary, disp)
    )
    return "\n".join(out) + "\n"


HISTORY_HEADER = "iter,group,node,local_max_error,kernel_evals,cum_kernel_evals,t1_s,t2_s"


def _history_row(r):
    return (
        f"{r.iteration},{r.group},{r.node},{r.local_max_error!r},"
        f"{r.kernel_evals},{r.cum_kernel_evals},{r.t1_s!r},{r.t2_s!r}"
    )


def write_history_csv(history):
    """Serialize a selection history; the final sweep (group -1) is the
    last row when present."""
    out = [HISTORY_HEADER]
    out.extend(_history_row(r) for r in history.records)
    if history.final_sweep is not None:
        out.append(_history_row(history.final_sweep))
    return "\n".join(out) + "\n"


def read_history_csv(stream):
    """Parse a history CSV back into a SelectionHistory.

    Only the records survive a round trip; seed/m/t3 are not stored in the
    CSV and come back as defaults.
    """
    if hasattr(stream, "read"):
        stream = stream.read()
    rows = [r for r in stream.splitlines() if r.strip()]
    if not rows or rows[0] != HISTORY_HEADER:
        raise ParseError(1, "missing history CSV header")
    history = SelectionHistory()
    for lineno, row in enumerate(rows[1:], start=2):
        fields = row.split(",")
        if len(fields) != 8:
            raise ParseError(lineno, f"expected 8 fields, got {len(fields)}")
        try:
            record = IterationRecord(
                iteration=int(fields[0]),
                group=int(fields[1]),
                node=int(fields[2]),
                local_max_error=float(fields[3]),
                kernel_evals=int(fields[4]),
                cum_kernel_evals=int(fields[5]),
                t1_s=float(fields[6]),
                t2_s=float(fields[7]),
            )
        except ValueError as err:
            raise ParseError(lineno, str(err)) from None
        if record.group == -1:
            history.final_sweep = record
        else:
            history.records.append(record)
    return history


SUPPORTS_HEADER = "node,x,y,z,wx,wy,wz"


def write_supports_csv(support):
    """Serialize a support set (ids, positions, weights) to CSV."""
    out = [SUPPORTS_HEADER]
    for node, pt, w in zip(support.nodes, support.points, support.weights):
        out.append(
            f"{node}," + ",".join(repr(float(v)) for v in pt) + ","
            + ",".join(repr(float(v)) for v in w)
        )
    return "\n".join(out) + "\n"


def read_supports_csv(stream):
    """Parse a supports CSV back into a SupportSet."""
    from .core import SupportSet

    if hasattr(stream, "read"):
        stream = stream.read()
    rows = [r for r in stream.splitlines() if r.strip()]
    if not rows or rows[0] != SUPPORTS_HEADER:
        raise ParseError(1, "missing supports CSV header")
    nodes, points, weights = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        fields = row.split(",")
        if len(fields) != 7:
            raise ParseError(lineno, f"expected 7 fields, got {len(fields)}")
        try:
            nodes.append(int(fields[0]))
            points.append([float(v) for v in fields[1:4]])
            weights.append([float(v) for v in fields[4:7]])
        except ValueError as err:
            raise ParseError(lineno, str(err)) from None
    return SupportSet(
        nodes=np.array(nodes, dtype=np.intp),
        points=np.array(points, dtype=float).reshape(-1, 3),
        weights=np.array(weights, dtype=float).reshape(-1, 3),
    )
