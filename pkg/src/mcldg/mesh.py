"""Affine meshes of 1D and 2D domains with face adjacency and boundary tags."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from .bernstein import reference_element

INTERIOR, INFLOW, OUTFLOW, WALL, PERIODIC = 0, 1, 2, 3, 4
TAG_CODES = {"interior": INTERIOR, "inflow": INFLOW, "outflow": OUTFLOW,
             "wall": WALL, "periodic": PERIODIC}
TAG_NAMES = {v: k for k, v in TAG_CODES.items()}
BOUNDARY_TAGS = ("inflow", "outflow", "wall")

# local faces as pairs of local vertex ids, counterclockwise
_FACE_VERTS = {
    "line": ((0,), (1,)),
    "quad": ((0, 1), (1, 2), (2, 3), (3, 0)),
    "tri": ((0, 1), (1, 2), (2, 0)),
}


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Affine triangulation with per-element-face adjacency.

    Per-face arrays are indexed ``[e, k]`` with ``k`` the local face.  A
    neighbor of ``-1`` marks a boundary face.  ``flip[e, k]`` says that the
    neighbor traverses the shared face in the opposite direction, so face
    parameter ``t`` on this side is ``1 - t`` on the other side.
    """

    kind: str
    vertices: np.ndarray
    elements: np.ndarray
    neighbor: np.ndarray
    neighbor_face: np.ndarray
    flip: np.ndarray
    tag: np.ndarray
    offset: np.ndarray
    origin: np.ndarray = field(init=False)
    jac: np.ndarray = field(init=False)
    adj: np.ndarray = field(init=False)
    det: np.ndarray = field(init=False)
    normal: np.ndarray = field(init=False)
    face_measure: np.ndarray = field(init=False)

    def __post_init__(self):
        v = self.vertices[self.elements]
        self.origin = v[:, 0].copy()
        if self.kind == "line":
            J = (v[:, 1, 0] - v[:, 0, 0])[:, None, None]
        elif self.kind == "quad":
            J = np.stack([v[:, 1] - v[:, 0], v[:, 3] - v[:, 0]], axis=-1)
            skew = np.abs(v[:, 2] - v[:, 1] - v[:, 3] + v[:, 0]).max(axis=-1)
            if np.any(skew > 1e-10 * np.abs(J).max()):
                raise MeshError("non-affine quadrilateral (not a parallelogram)")
        else:
            J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        det = np.linalg.det(J) if self.dim > 1 else J[:, 0, 0]
        if np.any(det <= 0):
            bad = int(np.flatnonzero(det <= 0)[0])
            raise MeshError(f"element {bad} has non-positive Jacobian determinant (negative area)")
        if self.dim == 1:
            adj = np.ones_like(J)
        else:
            adj = np.empty_like(J)
            adj[:, 0, 0] = J[:, 1, 1]
            adj[:, 1, 1] = J[:, 0, 0]
            adj[:, 0, 1] = -J[:, 0, 1]
            adj[:, 1, 0] = -J[:, 1, 0]
        self.jac, self.adj, self.det = J, adj, det
        ref = reference_element(self.kind, 1)
        if self.dim == 1:
            self.normal = np.broadcast_to(ref.face_normals, (self.n_elements, 2, 1)).copy()
            self.face_measure = np.ones((self.n_elements, 2))
        else:
            # from vertex coordinates, so that neighbours see exactly opposite
            # normals and identical lengths
            fv = np.array(_FACE_VERTS[self.kind])
            tang = v[:, fv[:, 1]] - v[:, fv[:, 0]]
            length = np.linalg.norm(tang, axis=-1)
            self.normal = np.stack([tang[..., 1], -tang[..., 0]], axis=-1) / length[..., None]
            self.face_measure = length

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_faces_per_element(self) -> int:
        return len(_FACE_VERTS[self.kind])

    def to_physical(self, xhat: np.ndarray) -> np.ndarray:
        """Map reference points ``(..., d)`` into every element: ``(E, ..., d)``."""
        return self.origin[:, None, :] + np.einsum("ekl,ql->eqk", self.jac, np.reshape(xhat, (-1, self.dim)))

    def element_geometry(self, e: int):
        """``(J, adj(J), |K|)`` of element ``e``."""
        ref_vol = 1.0 if self.kind != "tri" else 0.5
        return self.jac[e].copy(), self.adj[e].copy(), float(self.det[e] * ref_vol)

    def face_pairs(self):
        """Unique faces as ``(e, k, e2, k2)`` rows; ``e2 = -1`` on the boundary."""
        rows = []
        for e in range(self.n_elements):
            for k in range(self.n_faces_per_element):
                e2 = self.neighbor[e, k]
                if e2 < 0 or (e, k) < (e2, self.neighbor_face[e, k]):
                    rows.append((e, k, e2, self.neighbor_face[e, k] if e2 >= 0 else -1))
        return np.array(rows, dtype=int)

    def boundary_counts(self) -> dict:
        out = {}
        for name in BOUNDARY_TAGS:
            out[name] = int(np.sum((self.neighbor < 0) & (self.tag == TAG_CODES[name])))
        return out

    def face_midpoints(self) -> np.ndarray:
        ref = reference_element(self.kind, 1)
        mids = ref.face_vertices.mean(axis=1)
        return self.to_physical(mids)


def _face_key(elements, e, k, kind):
    return tuple(sorted(int(elements[e, v]) for v in _FACE_VERTS[kind][k]))


def _connect(kind, vertices, elements):
    """Match element faces through their sorted vertex tuples."""
    E = len(elements)
    nf = len(_FACE_VERTS[kind])
    neighbor = -np.ones((E, nf), dtype=int)
    neighbor_face = -np.ones((E, nf), dtype=int)
    seen: dict = {}
    for e in range(E):
        for k in range(nf):
            key = _face_key(elements, e, k, kind)
            if key in seen:
                e2, k2 = seen.pop(key)
                if e2 < 0:
                    raise MeshError(f"face {key} shared by more than two elements")
                neighbor[e, k], neighbor_face[e, k] = e2, k2
                neighbor[e2, k2], neighbor_face[e2, k2] = e, k
                seen[key] = (-1, -1)
            else:
                seen[key] = (e, k)
    flip = np.zeros((E, nf), dtype=bool)
    if kind != "line":
        fv = _FACE_VERTS[kind]
        for e in range(E):
            for k in range(nf):
                e2 = neighbor[e, k]
                if e2 >= 0:
                    a = elements[e, fv[k][0]]
                    b = elements[e2, fv[neighbor_face[e, k]][0]]
                    flip[e, k] = a != b
    return neighbor, neighbor_face, flip


def _pair_periodic(mesh_arrays, pairs, kind, offsets):
    neighbor, neighbor_face, flip, tag, offset = mesh_arrays
    for (e1, k1), (e2, k2), off in zip(*pairs, offsets):
        neighbor[e1, k1], neighbor_face[e1, k1] = e2, k2
        neighbor[e2, k2], neighbor_face[e2, k2] = e1, k1
        tag[e1, k1] = tag[e2, k2] = PERIODIC
        offset[e1, k1] = off
        offset[e2, k2] = -np.asarray(off)
        if kind != "line":
            flip[e1, k1] = flip[e2, k2] = True


def build_structured_line_mesh(n: int, interval=(0.0, 1.0), periodic: bool = False,
                               left: str = "outflow", right: str = "outflow") -> Mesh:
    """``n`` equal elements on ``interval``; endpoints paired when ``periodic``."""
    a, b = (float(v) for v in interval)
    if n < 1:
        raise MeshError("element count must be >= 1")
    if not a < b:
        raise MeshError("interval must satisfy a < b")
    x = np.linspace(a, b, n + 1)
    x[-1] = b
    verts = x[:, None]
    elems = np.stack([np.arange(n), np.arange(1, n + 1)], axis=-1)
    neighbor, neighbor_face, flip = _connect("line", verts, elems)
    tag = np.zeros((n, 2), dtype=int)
    offset = np.zeros((n, 2, 1))
    if periodic:
        _pair_periodic((neighbor, neighbor_face, flip, tag, offset),
                       ([(0, 0)], [(n - 1, 1)]), "line", [np.array([b - a])])
    else:
        for name in (left, right):
            if name not in BOUNDARY_TAGS:
                raise MeshError(f"unknown boundary tag {name!r}")
        tag[0, 0] = TAG_CODES[left]
        tag[n - 1, 1] = TAG_CODES[right]
    return Mesh("line", verts, elems, neighbor, neighbor_face, flip, tag, offset)


BoundarySpec = Mapping[str, Union[str, Callable[[np.ndarray], str]]]


def build_structured_quad_mesh(nx: int, ny: int, bbox=((0.0, 1.0), (0.0, 1.0)),
                               boundary_spec: Optional[BoundarySpec] = None) -> Mesh:
    """Uniform axis-aligned quadrilaterals on ``bbox = ((x0, x1), (y0, y1))``.

    ``boundary_spec`` maps the sides ``left/right/bottom/top`` to a tag name or
    to a callable receiving the face midpoint and returning a tag name.  The
    tag ``"periodic"`` must be given to both opposite sides.
    """
    (x0, x1), (y0, y1) = bbox
    if nx < 1 or ny < 1:
        raise MeshError("element counts must be >= 1")
    if not (x0 < x1 and y0 < y1):
        raise MeshError("degenerate bounding box")
    spec = {"left": "outflow", "right": "outflow", "bottom": "outflow", "top": "outflow"}
    spec.update(boundary_spec or {})
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    elems = np.array([[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
                      for j in range(ny) for i in range(nx)])
    neighbor, neighbor_face, flip = _connect("quad", verts, elems)
    E = len(elems)
    tag = np.zeros((E, 4), dtype=int)
    offset = np.zeros((E, 4, 2))
    eid = lambda i, j: j * nx + i  # noqa: E731
    sides = {
        "bottom": ([eid(i, 0) for i in range(nx)], 0),
        "right": ([eid(nx - 1, j) for j in range(ny)], 1),
        "top": ([eid(i, ny - 1) for i in range(nx)], 2),
        "left": ([eid(0, j) for j in range(ny)], 3),
    }
    arrays = (neighbor, neighbor_face, flip, tag, offset)
    for a, b, off in (("left", "right", (x1 - x0, 0.0)), ("bottom", "top", (0.0, y1 - y0))):
        pa, pb = spec[a] == "periodic", spec[b] == "periodic"
        if pa != pb:
            raise MeshError(f"periodic side {a if pa else b} has no periodic partner")
        if pa:
            ea, ka = sides[a]
            eb, kb = sides[b]
            _pair_periodic(arrays, ([(e, ka) for e in ea], [(e, kb) for e in eb]),
                           "quad", [np.array(off)] * len(ea))
    mesh = Mesh("quad", verts, elems, neighbor, neighbor_face, flip, tag, offset)
    mids = mesh.face_midpoints()
    for side, (els, k) in sides.items():
        rule = spec[side]
        if rule == "periodic":
            continue
        for e in els:
            name = rule(mids[e, k]) if callable(rule) else rule
            if name not in BOUNDARY_TAGS:
                raise MeshError(f"unknown boundary tag {name!r}")
            mesh.tag[e, k] = TAG_CODES[name]
    return mesh


def read_unstructured_tri_mesh(text: str) -> Mesh:
    """Parse the plain-text triangle format.

    Line 1 holds ``NV NE NB``, followed by ``NV`` vertex lines ``x y``, ``NE``
    triangles ``v0 v1 v2`` (0-based, counterclockwise) and ``NB`` boundary
    edges ``va vb tag``.  ``#`` starts a comment.
    """
    lines = []
    for raw in text.splitlines():
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append(body.split())
    if not lines:
        raise MeshError("empty mesh file")
    try:
        nv, ne, nb = (int(t) for t in lines[0])
    except ValueError as exc:
        raise MeshError(f"bad header {lines[0]}") from exc
    if len(lines) != 1 + nv + ne + nb:
        raise MeshError(f"expected {1 + nv + ne + nb} data lines, found {len(lines)}")
    verts = np.array([[float(t) for t in ln] for ln in lines[1:1 + nv]])
    elems = np.array([[int(t) for t in ln] for ln in lines[1 + nv:1 + nv + ne]], dtype=int)
    if verts.shape != (nv, 2) or elems.shape != (ne, 3):
        raise MeshError("malformed vertex or triangle records")
    if elems.min() < 0 or elems.max() >= nv:
        raise MeshError("triangle references an unknown vertex")
    neighbor, neighbor_face, flip = _connect("tri", verts, elems)
    tag = np.zeros((ne, 3), dtype=int)
    offset = np.zeros((ne, 3, 2))
    boundary = {}
    for e, k in zip(*np.nonzero(neighbor < 0)):
        boundary[_face_key(elems, e, k, "tri")] = (e, k)
    for ln in lines[1 + nv + ne:]:
        if len(ln) != 3:
            raise MeshError(f"malformed boundary record {ln}")
        key = tuple(sorted((int(ln[0]), int(ln[1]))))
        name = ln[2]
        if name not in BOUNDARY_TAGS:
            raise MeshError(f"unknown boundary tag {name!r}")
        if key not in boundary:
            raise MeshError(f"boundary edge {key} is not on the mesh boundary")
        e, k = boundary.pop(key)
        tag[e, k] = TAG_CODES[name]
    if boundary:
        raise MeshError(f"{len(boundary)} boundary edges have no tag (non-conforming mesh?)")
    return Mesh("tri", verts, elems, neighbor, neighbor_face, flip, tag, offset)


def structured_triangle_mesh_text(nx: int, ny: int, bbox=((0.0, 1.0), (0.0, 1.0)),
                                  tag: str = "outflow") -> str:
    """Text of a uniform triangulation (each box split along its diagonal)."""
    (x0, x1), (y0, y1) = bbox
    if nx < 1 or ny < 1:
        raise MeshError("element counts must be >= 1")
    if tag not in BOUNDARY_TAGS:
        raise MeshError(f"unknown boundary tag {tag!r}")
    xs, ys = np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)
    vid = lambda i, j: j * (nx + 1) + i  # noqa: E731
    verts = [f"{x:.17g} {y:.17g}" for y in ys for x in xs]
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [f"{a} {b} {c}", f"{a} {c} {d}"]
    edges = [f"{vid(i, 0)} {vid(i + 1, 0)} {tag}" for i in range(nx)]
    edges += [f"{vid(i + 1, ny)} {vid(i, ny)} {tag}" for i in range(nx)]
    edges += [f"{vid(nx, j)} {vid(nx, j + 1)} {tag}" for j in range(ny)]
    edges += [f"{vid(0, j + 1)} {vid(0, j)} {tag}" for j in range(ny)]
    return "\n".join([f"{len(verts)} {len(tris)} {len(edges)}"] + verts + tris + edges) + "\n"
