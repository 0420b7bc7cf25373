"""Discrete unit sphere for the d=3 orientation axis.

The sampling is a subdivided icosahedron: edge midpoints are inserted and
reprojected to the unit sphere, so level ``s`` has ``10*4**s + 2`` vertices
(12, 42, 162, ...).  Per-vertex quadrature weights are one third of the
summed spherical areas of the incident triangles, an exact partition of the
total area 4*pi.

The tangential gradient at a vertex fits the ring-1 data with the linear
interpolant of each incident triangle (the piecewise-linear fit of the
one-ring), averages the per-face gradients with area weights and projects
to the tangent plane.  The tangential divergence is the exact negative
adjoint of that gradient under the weighted inner product
``<f, g> = sum_i w_i f_i g_i``, so summation by parts holds to machine
precision by construction, and the composite div(grad .) is a pointwise
consistent Laplace-Beltrami approximation (a vertex-wise least-squares
stencil is not: its adjoint loses pointwise consistency on the slightly
irregular icosphere stars).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

# canonical icosahedron (un-normalized)
_ICO_VERTS = np.array(
    [
        [-1.0, _PHI, 0.0],
        [1.0, _PHI, 0.0],
        [-1.0, -_PHI, 0.0],
        [1.0, -_PHI, 0.0],
        [0.0, -1.0, _PHI],
        [0.0, 1.0, _PHI],
        [0.0, -1.0, -_PHI],
        [0.0, 1.0, -_PHI],
        [_PHI, 0.0, -1.0],
        [_PHI, 0.0, 1.0],
        [-_PHI, 0.0, -1.0],
        [-_PHI, 0.0, 1.0],
    ]
)

_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)

MAX_SUBDIV = 6  # resource guard: level 6 is already 40962 vertices


@dataclass
class SphereSampling:
    """Icosphere vertices with adjacency, quadrature weights and operators.

    Immutable after construction; safe to share across threads.
    """

    vertices: np.ndarray          # (n, 3) unit vectors
    faces: np.ndarray             # (f, 3) vertex indices
    neighbors: list               # list of sorted int arrays, ring-1
    weights: np.ndarray           # (n,) steradians, sums to 4*pi
    h_a: float                    # representative angular spacing (radians)
    _grad_mats: tuple = field(default=None, repr=False, compare=False)
    _tangent_basis: np.ndarray = field(default=None, repr=False, compare=False)
    _antipode: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def grad_mats(self):
        """Three sparse (n, n) matrices giving the ambient x/y/z components
        of the tangential gradient."""
        if self._grad_mats is None:
            self._grad_mats = _build_gradient_matrices(self.vertices, self.faces, self.neighbors)
        return self._grad_mats

    def tangent_basis(self) -> np.ndarray:
        """Deterministic orthonormal tangent pair per vertex, shape (n, 2, 3)."""
        if self._tangent_basis is None:
            self._tangent_basis = _tangent_basis(self.vertices)
        return self._tangent_basis

    def antipode_map(self) -> np.ndarray | None:
        """Index of -n for each vertex n, or None if not antipodally closed."""
        if self._antipode is None:
            self._antipode = _antipode_map(self.vertices)
        if self._antipode is False:
            return None
        return self._antipode

    def export_text(self) -> str:
        """Plain-text vertex table: index, x, y, z, weight per line."""
        lines = []
        for i, (v, w) in enumerate(zip(self.vertices, self.weights)):
            lines.append(f"{i} {v[0]:.17g} {v[1]:.17g} {v[2]:.17g} {w:.17g}")
        return "\n".join(lines) + "\n"


def build_icosphere(subdiv: int) -> SphereSampling:
    """Subdivided icosahedron sampling of the unit sphere.

    ``subdiv`` rounds of edge-midpoint subdivision with reprojection,
    giving ``10*4**subdiv + 2`` vertices.  Rejects subdiv > 6.
    """
    if subdiv < 0:
        raise ConfigError("subdiv must be >= 0")
    if subdiv > MAX_SUBDIV:
        raise ConfigError(f"subdiv {subdiv} exceeds resource guard {MAX_SUBDIV}")

    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES.copy()
    for _ in range(subdiv):
        verts, faces = _subdivide(verts, faces)

    return _sampling_from_mesh(verts, faces)


def from_points(vertices: np.ndarray, weights: np.ndarray, h_a: float) -> SphereSampling:
    """Rebuild a sampling (adjacency via the convex hull) from stored data.

    Used by the lifted-field reader: the file stores vertices and weights
    only, the triangulation is recovered from the hull of the point set.
    """
    from scipy.spatial import ConvexHull

    vertices = np.asarray(vertices, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise ConfigError("vertices must be (n, 3)")
    if weights.shape != (vertices.shape[0],):
        raise ConfigError("weights length must match vertex count")
    hull = ConvexHull(vertices, qhull_options="Qt")
    faces = hull.simplices.astype(np.int64)
    neighbors = _neighbors_from_faces(vertices.shape[0], faces)
    return SphereSampling(
        vertices=vertices,
        faces=faces,
        neighbors=neighbors,
        weights=weights,
        h_a=float(h_a),
    )


def spherical_gradient(f: np.ndarray, s: SphereSampling) -> np.ndarray:
    """Tangent-plane gradient of a per-vertex function.

    ``f`` has shape (n,) or (n, ...); the result appends an ambient-3
    component axis at the end and is orthogonal to the vertex normal by
    construction.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[0] != s.n_vertices:
        raise ConfigError("leading axis of f must match vertex count")
    if not np.all(np.isfinite(f)):
        raise ConfigError("non-finite values in spherical field")
    ex, ey, ez = s.grad_mats()
    flat = f.reshape(s.n_vertices, -1)
    out = np.stack([ex @ flat, ey @ flat, ez @ flat], axis=-1)
    return out.reshape(f.shape + (3,))


def spherical_divergence(v: np.ndarray, s: SphereSampling) -> np.ndarray:
    """Tangential divergence: exact negative adjoint of the gradient.

    ``<f, div v>_w = -<grad f, v>_w`` holds to machine precision.  Rejects
    fields that are not tangent (``v . n`` above 1e-10 relative).
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != s.n_vertices or v.shape[-1] != 3:
        raise ConfigError("v must have shape (n, ..., 3)")
    radial = np.einsum("n...c,nc->n...", v, s.vertices)
    scale = max(float(np.abs(v).max(initial=0.0)), 1.0)
    if np.abs(radial).max(initial=0.0) > 1e-10 * scale:
        raise ConfigError("spherical_divergence requires a tangent field")
    ex, ey, ez = s.grad_mats()
    flat = v.reshape(s.n_vertices, -1, 3)
    w = s.weights[:, None]
    acc = ex.T @ (w * flat[..., 0]) + ey.T @ (w * flat[..., 1]) + ez.T @ (w * flat[..., 2])
    out = -acc / w
    return out.reshape(v.shape[:-1])


# ---------------------------------------------------------------------------
# mesh construction

def _subdivide(verts: np.ndarray, faces: np.ndarray):
    verts = list(verts)
    midpoint = {}

    def mid(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in midpoint:
            p = verts[i] + verts[j]
            verts.append(p / np.linalg.norm(p))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def _neighbors_from_faces(n: int, faces: np.ndarray) -> list:
    nbrs = [set() for _ in range(n)]
    for a, b, c in faces:
        nbrs[a].update((b, c))
        nbrs[b].update((a, c))
        nbrs[c].update((a, b))
    return [np.array(sorted(s), dtype=np.int64) for s in nbrs]


def _tri_solid_angle(a, b, c):
    """Spherical area of the triangle with unit-vector corners a, b, c."""
    num = np.abs(np.dot(a, np.cross(b, c)))
    den = 1.0 + np.dot(a, b) + np.dot(b, c) + np.dot(c, a)
    return 2.0 * np.arctan2(num, den)


def _sampling_from_mesh(verts: np.ndarray, faces: np.ndarray) -> SphereSampling:
    n = verts.shape[0]
    weights = np.zeros(n)
    for a, b, c in faces:
        area = _tri_solid_angle(verts[a], verts[b], verts[c])
        third = area / 3.0
        weights[a] += third
        weights[b] += third
        weights[c] += third

    edges = set()
    for a, b, c in faces:
        edges.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a))})
    arcs = [np.arccos(np.clip(np.dot(verts[i], verts[j]), -1.0, 1.0)) for i, j in edges]
    # half the shortest edge arc: the most restrictive one-sided step of the
    # ring-1 stencil, which is the quantity that belongs in step-size bounds
    # (level 2 gives 0.1384 rad, about 10% above pi/25)
    h_a = 0.5 * float(np.min(arcs))

    return SphereSampling(
        vertices=verts,
        faces=faces,
        neighbors=_neighbors_from_faces(n, faces),
        weights=weights,
        h_a=h_a,
    )


# ---------------------------------------------------------------------------
# differential operators

def _tangent_basis(verts: np.ndarray) -> np.ndarray:
    n = verts.shape[0]
    basis = np.empty((n, 2, 3))
    for i, v in enumerate(verts):
        ref = np.array([0.0, 0.0, 1.0]) if abs(v[2]) <= 0.9 else np.array([1.0, 0.0, 0.0])
        t1 = np.cross(ref, v)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(v, t1)
        basis[i, 0] = t1
        basis[i, 1] = t2
    return basis


def _build_gradient_matrices(verts: np.ndarray, faces: np.ndarray, neighbors: list):
    """Ring-1 tangential gradient as three sparse component matrices.

    Per face, the gradient of the linear interpolant of the corner values;
    per vertex, the area-weighted average of the incident face gradients,
    projected to the tangent plane.  Annihilates constants exactly and is
    orthogonal to the vertex normal by construction.
    """
    n = verts.shape[0]
    for i, nbrs in enumerate(neighbors):
        if len(nbrs) < 2:
            raise ConfigError(f"vertex {i} has fewer than 2 neighbors")
    acc = [dict() for _ in range(n)]
    wacc = np.zeros(n)
    for a, b, c in faces:
        pa, pb, pc = verts[a], verts[b], verts[c]
        nrm = np.cross(pb - pa, pc - pa)
        twice_area = np.linalg.norm(nrm)
        nrm = nrm / twice_area
        # gradient of the hat function at each corner: rotated opposite edge
        grads = (
            (a, np.cross(nrm, pc - pb) / twice_area),
            (b, np.cross(nrm, pa - pc) / twice_area),
            (c, np.cross(nrm, pb - pa) / twice_area),
        )
        third = twice_area / 6.0  # area / 3
        for i in (a, b, c):
            wacc[i] += third
            bucket = acc[i]
            for j, g in grads:
                if j in bucket:
                    bucket[j] = bucket[j] + third * g
                else:
                    bucket[j] = third * g
    rows, cols, vals = [[], [], []], [[], [], []], [[], [], []]
    for i in range(n):
        ni = verts[i]
        for j, g in acc[i].items():
            g = g / wacc[i]
            g = g - (g @ ni) * ni
            for c3 in range(3):
                rows[c3].append(i)
                cols[c3].append(j)
                vals[c3].append(g[c3])
    return tuple(
        sp.csr_matrix((vals[c3], (rows[c3], cols[c3])), shape=(n, n)) for c3 in range(3)
    )


def _antipode_map(verts: np.ndarray):
    n = verts.shape[0]
    idx = np.empty(n, dtype=np.int64)
    for i, v in enumerate(verts):
        d = np.linalg.norm(verts + v, axis=1)
        j = int(np.argmin(d))
        if d[j] > 1e-9:
            return False
        idx[i] = j
    return idx
