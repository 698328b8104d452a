"""Closed triangle meshes, their cotangent operators, and OFF file I/O.

A :class:`TriangleMesh` is either *embedded* (vertex coordinates in R^d,
possibly constrained to the unit sphere) or *abstract* (no coordinates,
just combinatorics plus one length per edge).  All metric quantities --
face areas, the lumped mass matrix, the cotangent stiffness matrix -- are
computed from edge lengths alone, so the two flavours share every code
path after `face_edge_lengths`.

Only closed connected surfaces are accepted: every edge must belong to
exactly two faces and the edge graph must be connected.  Meshes with
boundary raise at construction time.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

__all__ = [
    "TriangleMesh",
    "cotangent_stiffness",
    "load_off",
    "mean_curvature",
    "save_off",
    "willmore_energy",
]

_AMBIENTS = ("euclidean", "unit_sphere")


class TriangleMesh:
    """A closed connected triangle mesh.

    Parameters
    ----------
    vertices : array_like of shape (nv, d) or None
        Vertex coordinates.  ``None`` declares an abstract mesh; then
        `edge_lengths` is required.
    faces : array_like of shape (nf, 3)
        Vertex indices of each triangle.
    ambient : {"euclidean", "unit_sphere", None}
        Geometric context of the coordinates.  ``"unit_sphere"`` asserts
        every vertex has unit norm (within 1e-12) and enables intrinsic
        sphere operations.  Must be ``None`` for abstract meshes.
    edge_lengths : array_like of shape (ne,), optional
        One positive length per edge, aligned with :attr:`edges` (the
        lexicographically sorted unique vertex pairs).  Required when
        ``vertices is None``; forbidden otherwise.

    Raises
    ------
    ValueError
        If the mesh is not closed, not connected, has an invalid face,
        or some face violates the strict triangle inequality.
    """

    def __init__(self, vertices, faces, ambient=None, edge_lengths=None):
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError(f"faces must have shape (nf, 3), got {faces.shape}")
        self.faces = faces

        if vertices is None:
            if ambient is not None:
                raise ValueError("abstract meshes cannot declare an ambient space")
            if edge_lengths is None:
                raise ValueError("abstract meshes require edge_lengths")
            self.vertices = None
            self._nv = int(faces.max()) + 1 if faces.size else 0
        else:
            if edge_lengths is not None:
                raise ValueError("edge_lengths is only for abstract meshes")
            vertices = np.ascontiguousarray(vertices, dtype=np.float64)
            if vertices.ndim != 2:
                raise ValueError("vertices must have shape (nv, d)")
            if ambient is not None and ambient not in _AMBIENTS:
                raise ValueError(f"unknown ambient {ambient!r}")
            self.vertices = vertices
            self._nv = vertices.shape[0]
        self.ambient = ambient

        self._cache = {}
        self._validate_faces()
        self._edges, self._face_edge_idx = self._build_edges()
        self._validate_closed_connected()

        if vertices is None:
            edge_lengths = np.ascontiguousarray(edge_lengths, dtype=np.float64)
            if edge_lengths.shape != (self._edges.shape[0],):
                raise ValueError(
                    f"edge_lengths must have shape ({self._edges.shape[0]},), "
                    f"one per edge, got {edge_lengths.shape}"
                )
            if np.any(edge_lengths <= 0.0):
                raise ValueError("edge lengths must be positive")
            self.edge_lengths = edge_lengths
        else:
            diffs = vertices[self._edges[:, 0]] - vertices[self._edges[:, 1]]
            self.edge_lengths = np.linalg.norm(diffs, axis=1)
            if ambient == "unit_sphere":
                norms = np.linalg.norm(vertices, axis=1)
                err = np.max(np.abs(norms - 1.0)) if norms.size else 0.0
                if err > 1e-12:
                    raise ValueError(
                        f"unit_sphere ambient but max |norm - 1| = {err:.3e}"
                    )

        self._validate_triangle_inequality()

    # ------------------------------------------------------------------ #
    # construction-time checks

    def _validate_faces(self):
        f = self.faces
        if f.size == 0:
            raise ValueError("mesh has no faces")
        if f.min() < 0 or f.max() >= self._nv:
            raise ValueError("face indices out of range")
        same = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        if same.any():
            raise ValueError(f"degenerate face {int(np.argmax(same))} repeats a vertex")
        if self.vertices is not None and self._nv != self.vertices.shape[0]:
            raise ValueError("vertex count does not match coordinate array")

    def _build_edges(self):
        f = self.faces
        # corner i of a face is opposite the edge formed by the other two
        opp = np.stack([f[:, [1, 2]], f[:, [2, 0]], f[:, [0, 1]]], axis=1)
        pairs = np.sort(opp.reshape(-1, 2), axis=1)
        keys = pairs[:, 0] * self._nv + pairs[:, 1]
        edge_keys, inverse = np.unique(keys, return_inverse=True)
        edges = np.column_stack([edge_keys // self._nv, edge_keys % self._nv])
        return edges, inverse.reshape(f.shape[0], 3)

    def _validate_closed_connected(self):
        counts = np.bincount(self._face_edge_idx.ravel(), minlength=self._edges.shape[0])
        if np.any(counts != 2):
            bad = int(np.argmax(counts != 2))
            u, v = self._edges[bad]
            raise ValueError(
                f"mesh is not closed: edge ({u}, {v}) lies in {counts[bad]} faces"
            )
        adj = sparse.coo_matrix(
            (np.ones(self._edges.shape[0]), (self._edges[:, 0], self._edges[:, 1])),
            shape=(self._nv, self._nv),
        )
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise ValueError(f"mesh has {ncomp} connected components")

    def _validate_triangle_inequality(self):
        lens = self.face_edge_lengths
        a, b, c = lens[:, 0], lens[:, 1], lens[:, 2]
        slack = np.minimum(b + c - a, np.minimum(a + c - b, a + b - c))
        if np.any(slack <= 0.0):
            bad = int(np.argmin(slack))
            raise ValueError(
                f"face {bad} violates the strict triangle inequality "
                f"(lengths {lens[bad].tolist()})"
            )

    # ------------------------------------------------------------------ #
    # basic queries

    @property
    def nv(self) -> int:
        """Number of vertices."""
        return self._nv

    @property
    def nf(self) -> int:
        """Number of faces."""
        return self.faces.shape[0]

    @property
    def dim(self) -> int | None:
        """Ambient dimension, or None for abstract meshes."""
        return None if self.vertices is None else self.vertices.shape[1]

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as lexicographically sorted vertex pairs, shape (ne, 2)."""
        return self._edges

    @property
    def euler_characteristic(self) -> int:
        return self._nv - self._edges.shape[0] + self.nf

    # ------------------------------------------------------------------ #
    # metric quantities (everything below works for abstract meshes too)

    @property
    def face_edge_lengths(self) -> np.ndarray:
        """Edge lengths per face, shape (nf, 3); column i is opposite corner i."""
        if "fel" not in self._cache:
            self._cache["fel"] = self.edge_lengths[self._face_edge_idx]
        return self._cache["fel"]

    @property
    def face_areas(self) -> np.ndarray:
        """Triangle areas by the numerically stable Heron formula, shape (nf,)."""
        if "areas" not in self._cache:
            lens = np.sort(self.face_edge_lengths, axis=1)[:, ::-1]  # a >= b >= c
            a, b, c = lens[:, 0], lens[:, 1], lens[:, 2]
            # Kahan's rearrangement avoids cancellation for needle triangles
            prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
            self._cache["areas"] = 0.25 * np.sqrt(np.maximum(prod, 0.0))
        return self._cache["areas"]

    @property
    def area(self) -> float:
        """Total surface area."""
        return float(self.face_areas.sum())

    @property
    def face_cotangents(self) -> np.ndarray:
        """Cotangent of the interior angle at each face corner, shape (nf, 3)."""
        if "cots" not in self._cache:
            sq = self.face_edge_lengths**2
            area4 = 4.0 * self.face_areas[:, None]
            # cot(angle at corner i) from the law of cosines, a is opposite
            a, b, c = sq[:, 0], sq[:, 1], sq[:, 2]
            cots = np.column_stack([b + c - a, c + a - b, a + b - c]) / area4
            self._cache["cots"] = cots
        return self._cache["cots"]

    @property
    def vertex_areas(self) -> np.ndarray:
        """Lumped (mixed Voronoi) vertex areas, shape (nv,).

        Inside a non-obtuse triangle each corner receives its true Voronoi
        area; obtuse triangles give half their area to the obtuse corner
        and a quarter to each of the others.  The areas sum exactly to the
        total surface area.
        """
        if "varea" not in self._cache:
            cots = self.face_cotangents
            sq = self.face_edge_lengths**2
            areas = self.face_areas
            # Voronoi area at corner i: (1/8)(|edge to j|^2 cot_k + |edge to k|^2 cot_j)
            # where the edge from corner i to corner j is opposite corner k.
            voronoi = 0.125 * (
                np.roll(sq, -1, axis=1) * np.roll(cots, -1, axis=1)
                + np.roll(sq, 1, axis=1) * np.roll(cots, 1, axis=1)
            )
            obtuse = cots < 0.0
            any_obtuse = obtuse.any(axis=1)
            contrib = np.where(
                any_obtuse[:, None],
                np.where(obtuse, 0.5 * areas[:, None], 0.25 * areas[:, None]),
                voronoi,
            )
            out = np.zeros(self._nv)
            np.add.at(out, self.faces, contrib)
            self._cache["varea"] = out
        return self._cache["varea"]

    # ------------------------------------------------------------------ #
    # topology

    @property
    def orientable(self) -> bool:
        """Whether the faces admit a consistent orientation."""
        if "orientable" not in self._cache:
            self._cache["orientable"] = self._check_orientable()
        return self._cache["orientable"]

    def _check_orientable(self) -> bool:
        # Faces adjacent through an edge must traverse it in opposite
        # directions once consistently oriented.  Propagate by BFS and
        # look for a contradiction.
        nf = self.nf
        edge_faces = [[] for _ in range(self._edges.shape[0])]
        directed = {}  # (face, edge_idx) -> True if face traverses edge as (lo, hi)
        f = self.faces
        for corner in range(3):
            u = f[:, (corner + 1) % 3]
            v = f[:, (corner + 2) % 3]
            eidx = self._face_edge_idx[:, corner]
            forward = u < v
            for face in range(nf):
                edge_faces[eidx[face]].append(face)
                directed[(face, eidx[face])] = bool(forward[face])
        flip = -np.ones(nf, dtype=np.int8)  # -1 unvisited, 0 keep, 1 reversed
        flip[0] = 0
        queue = [0]
        face_edges = self._face_edge_idx
        while queue:
            face = queue.pop()
            for eidx in face_edges[face]:
                fa, fb = edge_faces[eidx]
                other = fb if fa == face else fa
                same_dir = directed[(face, eidx)] == directed[(other, eidx)]
                # consistent orientation: opposite traversal after flips
                want = flip[face] ^ (1 if same_dir else 0)
                if flip[other] == -1:
                    flip[other] = want
                    queue.append(other)
                elif flip[other] != want:
                    return False
        return True

    @property
    def genus(self) -> int:
        """Genus for orientable meshes; genus of the orientable double cover otherwise."""
        chi = self.euler_characteristic
        if self.orientable:
            if chi % 2:
                raise ValueError(f"orientable surface with odd Euler characteristic {chi}")
            return (2 - chi) // 2
        return 1 - chi

    # ------------------------------------------------------------------ #

    def __repr__(self) -> str:
        kind = "abstract" if self.vertices is None else f"R^{self.dim}"
        amb = f", ambient={self.ambient}" if self.ambient else ""
        return (
            f"TriangleMesh({self._nv} vertices, {self.nf} faces, {kind}{amb}, "
            f"chi={self.euler_characteristic})"
        )


def cotangent_stiffness(mesh: TriangleMesh) -> sparse.csc_matrix:
    """Cotangent stiffness matrix K of the positive Laplacian.

    ``u^T K u`` is the Dirichlet energy of the piecewise linear function
    with vertex values u; K is symmetric positive semidefinite with the
    constants in its kernel.  Assembled from edge lengths only.

    Returns
    -------
    scipy.sparse.csc_matrix of shape (nv, nv)
    """
    f = mesh.faces
    cots = mesh.face_cotangents
    nv = mesh.nv
    rows, cols, vals = [], [], []
    for corner in range(3):
        j = f[:, (corner + 1) % 3]
        k = f[:, (corner + 2) % 3]
        w = 0.5 * cots[:, corner]
        rows += [j, k, j, k]
        cols += [k, j, j, k]
        vals += [-w, -w, w, w]
    K = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv, nv),
    )
    return K.tocsc()


def mean_curvature(mesh: TriangleMesh, component: str = "ambient") -> np.ndarray:
    """Discrete mean curvature vector at each vertex, shape (nv, d).

    Defined through the coordinate identity  H = -(Laplacian x) / 2  for
    surfaces, with the positive lumped-FEM Laplacian: on the unit sphere
    this gives the inward normal of length one.

    Parameters
    ----------
    mesh : TriangleMesh
        Must be embedded (have vertex coordinates).
    component : {"ambient", "sphere"}
        ``"sphere"`` projects out the radial part, leaving the mean
        curvature of the surface viewed inside the unit sphere; requires
        ``ambient="unit_sphere"``.
    """
    if mesh.vertices is None:
        raise ValueError("mean curvature needs vertex coordinates")
    K = cotangent_stiffness(mesh)
    H = -(K @ mesh.vertices) / (2.0 * mesh.vertex_areas[:, None])
    if component == "ambient":
        return H
    if component == "sphere":
        if mesh.ambient != "unit_sphere":
            raise ValueError('component="sphere" requires unit_sphere ambient')
        radial = np.sum(H * mesh.vertices, axis=1, keepdims=True)
        return H - radial * mesh.vertices
    raise ValueError(f"unknown component {component!r}")


def willmore_energy(mesh: TriangleMesh, component: str = "ambient") -> float:
    """Integral of |H|^2 over the surface (lumped quadrature)."""
    H = mean_curvature(mesh, component=component)
    return float(np.sum(mesh.vertex_areas * np.sum(H * H, axis=1)))


# ---------------------------------------------------------------------- #
# OFF file I/O


def save_off(mesh: TriangleMesh, path) -> None:
    """Write an embedded mesh as ASCII OFF.

    The ambient tag is preserved in a leading comment so that
    :func:`load_off` round-trips it.  Coordinates are written with 17
    significant digits and reload bit-for-bit.
    """
    if mesh.vertices is None:
        raise ValueError("abstract meshes have no coordinates to export")
    lines = ["OFF"]
    if mesh.ambient is not None:
        lines.append(f"# ambient {mesh.ambient} {mesh.dim}")
    lines.append(f"{mesh.nv} {mesh.nf} 0")
    for v in mesh.vertices:
        lines.append(" ".join(f"{x:.17g}" for x in v))
    for face in mesh.faces:
        lines.append("3 " + " ".join(str(int(i)) for i in face))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_off(path, ambient: str | None = None) -> TriangleMesh:
    """Read an ASCII OFF file with triangle faces.

    Vertex dimension is inferred from the first vertex line, so spheres
    in R^4 or R^5 load without extra flags.  An ``# ambient`` comment
    written by :func:`save_off` restores the ambient tag; the `ambient`
    argument overrides it.

    Raises
    ------
    ValueError
        On malformed content, with the offending line number.
    """
    with open(path) as fh:
        raw = fh.readlines()

    file_ambient = None
    file_dim = None
    tokens: list[tuple[int, list[str]]] = []
    for lineno, line in enumerate(raw, start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            parts = stripped[1:].split()
            if len(parts) >= 2 and parts[0] == "ambient":
                file_ambient = parts[1]
                if len(parts) >= 3:
                    file_dim = int(parts[2])
            continue
        if stripped:
            tokens.append((lineno, stripped.split()))

    if not tokens or tokens[0][1] != ["OFF"]:
        raise ValueError(f"{path}: missing OFF header")
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing counts line")
    lineno, counts = tokens[1]
    if len(counts) != 3:
        raise ValueError(f"{path}:{lineno}: counts line must have three fields")
    try:
        nv, nf, _ = (int(c) for c in counts)
    except ValueError as exc:
        raise ValueError(f"{path}:{lineno}: bad counts line") from exc
    body = tokens[2:]
    if len(body) < nv + nf:
        raise ValueError(f"{path}: expected {nv} vertices and {nf} faces")

    dim = len(body[0][1]) if nv else (file_dim or 3)
    verts = np.empty((nv, dim))
    for i in range(nv):
        lineno, fields = body[i]
        if len(fields) != dim:
            raise ValueError(
                f"{path}:{lineno}: vertex has {len(fields)} coordinates, expected {dim}"
            )
        try:
            verts[i] = [float(x) for x in fields]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad vertex coordinate") from exc

    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        lineno, fields = body[nv + i]
        if fields[0] != "3" or len(fields) != 4:
            raise ValueError(f"{path}:{lineno}: only triangle faces are supported")
        try:
            faces[i] = [int(x) for x in fields[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad face index") from exc

    if ambient is None:
        ambient = file_ambient
    return TriangleMesh(verts, faces, ambient=ambient)
