"""Closed oriented triangle meshes: container, validation, OFF/OBJ I/O."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Scale-free degeneracy guard: a face is degenerate when its area falls
# below this factor times the squared longest edge of the mesh.
DEGENERATE_AREA_FACTOR = 1e-12


class MeshError(Exception):
    """Invalid mesh topology, geometry, or file content."""


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex positions and face index triples, counterclockwise from outside.

    Instances are immutable: the arrays are locked after construction and
    safe to share across threads.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError("faces must be an (m, 3) array")
        if len(f) and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face index out of range")
        if len(f) and (
            (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])
        ).any():
            raise MeshError("face with repeated vertex index")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def half_edges(self) -> np.ndarray:
        """Directed edges, three per face, shape (3F, 2)."""
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape (E, 2)."""
        return np.unique(np.sort(self.half_edges, axis=1), axis=0)

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        """Same connectivity, new positions."""
        return TriangleMesh(vertices, self.faces)


@dataclass(frozen=True)
class MeshReport:
    is_closed: bool
    is_oriented: bool
    euler_characteristic: int
    genus: int
    min_face_area: float
    min_edge_length: float
    max_edge_length: float
    aspect_quality: float

    @property
    def is_valid(self) -> bool:
        return (
            self.is_closed
            and self.is_oriented
            and self.min_face_area > DEGENERATE_AREA_FACTOR * self.max_edge_length**2
        )

    def summary(self) -> str:
        return (
            f"closed={self.is_closed} oriented={self.is_oriented} "
            f"chi={self.euler_characteristic} genus={self.genus} "
            f"min_area={self.min_face_area:.3g} "
            f"edge=[{self.min_edge_length:.3g},{self.max_edge_length:.3g}] "
            f"quality={self.aspect_quality:.3g}"
        )


def face_corner_vertices(mesh: TriangleMesh):
    """The three vertex-position arrays (a, b, c) of every face."""
    v, f = mesh.vertices, mesh.faces
    return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]


def face_areas_normals(mesh: TriangleMesh):
    """Per-face area and unit outward normal (for CCW-from-outside faces)."""
    a, b, c = face_corner_vertices(mesh)
    cr = np.cross(b - a, c - a)
    nrm = np.linalg.norm(cr, axis=1)
    areas = 0.5 * nrm
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = cr / nrm[:, None]
    return areas, normals


def edge_lengths(mesh: TriangleMesh) -> np.ndarray:
    e = mesh.edges
    return np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)


def face_qualities(mesh: TriangleMesh) -> np.ndarray:
    """4*sqrt(3)*area / sum of squared edge lengths; 1 for equilateral."""
    a, b, c = face_corner_vertices(mesh)
    l2 = (
        np.sum((b - a) ** 2, axis=1)
        + np.sum((c - b) ** 2, axis=1)
        + np.sum((a - c) ** 2, axis=1)
    )
    areas, _ = face_areas_normals(mesh)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = 4.0 * np.sqrt(3.0) * areas / l2
    return np.where(l2 > 0, q, 0.0)


def validate(mesh: TriangleMesh) -> MeshReport:
    """Topology and quality report; failures are reported, not raised."""
    he = mesh.half_edges
    # oriented: no directed edge is repeated
    he_sorted = np.sort(he, axis=1)
    und, counts = np.unique(he_sorted, axis=0, return_counts=True)
    _, dir_counts = np.unique(he, axis=0, return_counts=True)
    is_oriented = bool((dir_counts == 1).all())
    # closed manifold: every undirected edge borders exactly two faces whose
    # directed copies run oppositely (each direction exactly once)
    is_closed = bool((counts == 2).all() and (dir_counts == 1).all())
    # duplicate faces (same unordered triple)
    tri_sorted = np.sort(mesh.faces, axis=1)
    if len(np.unique(tri_sorted, axis=0)) != mesh.num_faces:
        is_oriented = False
    n_e = len(und)
    chi = mesh.num_vertices - n_e + mesh.num_faces
    genus = (2 - chi) // 2 if (is_closed and is_oriented) else -1
    areas, _ = face_areas_normals(mesh)
    el = edge_lengths(mesh)
    q = face_qualities(mesh)
    return MeshReport(
        is_closed=is_closed,
        is_oriented=is_oriented,
        euler_characteristic=int(chi),
        genus=int(genus),
        min_face_area=float(areas.min()) if len(areas) else 0.0,
        min_edge_length=float(el.min()) if len(el) else 0.0,
        max_edge_length=float(el.max()) if len(el) else 0.0,
        aspect_quality=float(q.min()) if len(q) else 0.0,
    )


def has_degenerate_faces(mesh: TriangleMesh) -> bool:
    areas, _ = face_areas_normals(mesh)
    hmax = edge_lengths(mesh).max()
    return bool((areas < DEGENERATE_AREA_FACTOR * hmax**2).any())


def rescale(mesh: TriangleMesh, center, factor: float) -> TriangleMesh:
    """Map every vertex x to (x - center) * factor; connectivity unchanged."""
    if not factor > 0:
        raise ValueError("rescale factor must be positive")
    center = np.asarray(center, dtype=np.float64)
    return mesh.with_vertices((mesh.vertices - center) * factor)


# ---------------------------------------------------------------------------
# File formats.  OFF is the canonical snapshot format (ASCII, 17 significant
# digits, counts line "V F 0").  OBJ is import-only.
# ---------------------------------------------------------------------------


def _content_lines(text: str):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def loads_off(text: str) -> TriangleMesh:
    lines = list(_content_lines(text))
    if not lines:
        raise MeshError("empty OFF file")
    if lines[0].upper() != "OFF":
        raise MeshError("missing OFF header")
    try:
        counts = [int(tok) for tok in lines[1].split()]
        nv, nf = counts[0], counts[1]
    except (IndexError, ValueError) as exc:
        raise MeshError("malformed OFF counts line") from exc
    body = lines[2:]
    if len(body) < nv + nf:
        raise MeshError("truncated OFF file")
    try:
        vertices = np.array(
            [[float(t) for t in body[i].split()[:3]] for i in range(nv)]
        )
    except ValueError as exc:
        raise MeshError("malformed OFF vertex line") from exc
    faces = []
    for i in range(nv, nv + nf):
        toks = body[i].split()
        try:
            k = int(toks[0])
            idx = [int(t) for t in toks[1 : 1 + k]]
        except (IndexError, ValueError) as exc:
            raise MeshError("malformed OFF face line") from exc
        if k != 3 or len(idx) != 3:
            raise MeshError("non-triangle face")
        faces.append(idx)
    return TriangleMesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))


def loads_obj(text: str) -> TriangleMesh:
    vertices = []
    faces = []
    for line in _content_lines(text):
        toks = line.split()
        if toks[0] == "v":
            try:
                vertices.append([float(t) for t in toks[1:4]])
            except ValueError as exc:
                raise MeshError("malformed OBJ vertex line") from exc
        elif toks[0] == "f":
            refs = toks[1:]
            if len(refs) != 3:
                raise MeshError("non-triangle face")
            try:
                idx = [int(r.split("/")[0]) - 1 for r in refs]
            except ValueError as exc:
                raise MeshError("malformed OBJ face line") from exc
            if min(idx) < 0:
                raise MeshError("face index out of range")
            faces.append(idx)
        # other record types (vn, vt, mtl, ...) are ignored on import
    if not vertices or not faces:
        raise MeshError("OBJ file without triangles")
    return TriangleMesh(
        np.array(vertices), np.array(faces, dtype=np.int64).reshape(-1, 3)
    )


def load_mesh(data, fmt: str) -> TriangleMesh:
    """Parse mesh bytes in the declared format ("off" or "obj")."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    fmt = fmt.lower()
    if fmt == "off":
        return loads_off(data)
    if fmt == "obj":
        return loads_obj(data)
    raise MeshError(f"unknown mesh format: {fmt}")


def dumps_off(mesh: TriangleMesh) -> str:
    out = ["OFF", f"{mesh.num_vertices} {mesh.num_faces} 0"]
    for x, y, z in mesh.vertices:
        out.append(f"{x:.17g} {y:.17g} {z:.17g}")
    for i, j, k in mesh.faces:
        out.append(f"3 {i} {j} {k}")
    return "\n".join(out) + "\n"


def save_off(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps_off(mesh))


def load_mesh_path(path) -> TriangleMesh:
    path = str(path)
    fmt = "obj" if path.lower().endswith(".obj") else "off"
    with open(path, "rb") as fh:
        return load_mesh(fh.read(), fmt)
