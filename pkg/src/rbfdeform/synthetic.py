"""Generated swept-wing test case.

Builds a tapered, swept wing surface (four-digit-style thickness profile,
cosine chordwise clustering), quad surface cells, and a cloud of volume
nodes: geometrically growing offset layers along the surface normals plus a
coarse background box. The volume cloud needs no connectivity, so layer
self-intersections far from the surface are harmless.
"""

import numpy as np

from .meshio import Mesh

_THICKNESS_COEFFS = (0.2969, -0.1260, -0.3516, 0.2843, -0.1036)


def _thickness(xi):
    """Half-thickness of a unit-chord section at chord fraction xi (closed
    trailing edge)."""
    a0, a1, a2, a3, a4 = _THICKNESS_COEFFS
    return a0 * np.sqrt(xi) + xi * (a1 + xi * (a2 + xi * (a3 + xi * a4)))


def swept_wing_surface(
    n_span=50,
    n_section=100,
    span=3.0,
    root_chord=1.0,
    taper=0.5,
    sweep_deg=30.0,
    thickness=0.12,
):
    """Structured swept-wing surface grid.

    Returns ``(points, cells, normals)``: an (n_span * n_section, 3) point
    array (section index fastest), quad cells over the grid (wrapping
    around the section), and outward unit normals per point.
    """
    if n_span < 2 or n_section < 4 or n_section % 2:
        raise ValueError("need n_span >= 2 and even n_section >= 4")
    z = np.linspace(0.0, span, n_span)
    u = 2.0 * np.pi * np.arange(n_section) / n_section
    xi = 0.5 * (1.0 - np.cos(u))
    side = np.where(np.sin(u) >= 0.0, 1.0, -1.0)
    chord = root_chord * (1.0 - (1.0 - taper) * z / span)
    x_le = np.tan(np.radians(sweep_deg)) * z

    grid = np.empty((n_span, n_section, 3))
    grid[:, :, 0] = x_le[:, None] + chord[:, None] * xi[None, :]
    grid[:, :, 1] = 5.0 * thickness * chord[:, None] * (side * _thickness(xi))[None, :]
    grid[:, :, 2] = z[:, None]

    # Outward normals from grid tangents, oriented away from the section
    # centroid (good enough for offset layers on this closed section).
    t_u = np.roll(grid, -1, axis=1) - np.roll(grid, 1, axis=1)
    t_z = np.empty_like(grid)
    t_z[1:-1] = grid[2:] - grid[:-2]
    t_z[0] = grid[1] - grid[0]
    t_z[-1] = grid[-1] - grid[-2]
    normals = np.cross(t_u, t_z)
    centroids = grid.mean(axis=1, keepdims=True)
    flip = (normals * (grid - centroids)).sum(axis=2) < 0.0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=2, keepdims=True)

    def node(j, k):
        return j * n_section + k % n_section

    cells = [
        np.array([node(j, k), node(j, k + 1), node(j + 1, k + 1), node(j + 1, k)])
        for j in range(n_span - 1)
        for k in range(n_section)
    ]
    return grid.reshape(-1, 3), cells, normals.reshape(-1, 3)


def swept_wing_case(
    n_span=50,
    n_section=100,
    n_layers=39,
    box_n=17,
    first_height=1e-3,
    growth=1.18,
    seed=0,
    **surface_kwargs,
):
    """Desk-scale mesh: wing surface as boundary plus a clustered volume cloud.

    Defaults give 5,000 boundary nodes and just under 200,000 volume nodes
    (offset layers with geometric spacing toward the surface, plus a
    jittered background box).
    """
    surface, cells, normals = swept_wing_surface(
        n_span=n_span, n_section=n_section, **surface_kwargs
    )
    nb = len(surface)

    heights = first_height * (growth ** np.arange(n_layers + 1) - 1.0) / (growth - 1.0)
    layers = [surface + h * normals for h in heights[1:]]

    lo = surface.min(axis=0)
    hi = surface.max(axis=0)
    pad = 0.75 * (hi - lo).max()
    axes = [np.linspace(lo[d] - pad, hi[d] + pad, box_n) for d in range(3)]
    bx, by, bz = np.meshgrid(*axes, indexing="ij")
    box = np.column_stack([bx.ravel(), by.ravel(), bz.ravel()])
    rng = np.random.default_rng(seed)
    box += rng.uniform(-0.01 * pad, 0.01 * pad, size=box.shape)

    nodes = np.vstack([surface] + layers + [box])
    return Mesh(nodes=nodes, boundary=np.arange(nb), cells=cells)
