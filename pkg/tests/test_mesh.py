import numpy as np
import pytest

from mcldg.mesh import (MeshError, TAG_CODES, build_structured_line_mesh, build_structured_quad_mesh,
                        read_unstructured_tri_mesh, structured_triangle_mesh_text)
from mcldg.benchmarks import generate_channel_mesh

TWO_TRIANGLES = """4 2 4
# unit square split along the diagonal
0 0
1 0
1 1
0 1
0 1 2
0 2 3
0 1 wall
1 2 outflow
2 3 wall
3 0 inflow
"""

REFERENCE_TRIANGLE = "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 wall\n1 2 wall\n2 0 wall\n"


def _all_meshes():
    return [
        build_structured_line_mesh(5, (0.0, 2.0), periodic=True),
        build_structured_line_mesh(3),
        build_structured_quad_mesh(3, 2, ((0, 2), (0, 1)),
                                   {s: "periodic" for s in ("left", "right", "bottom", "top")}),
        build_structured_quad_mesh(2, 4),
        read_unstructured_tri_mesh(structured_triangle_mesh_text(3, 2)),
        read_unstructured_tri_mesh(generate_channel_mesh(18, 8)),
    ]


def test_periodic_line_two_elements():
    m = build_structured_line_mesh(2, periodic=True)
    assert m.n_elements == 2
    assert np.allclose(m.vertices[:, 0], [0.0, 0.5, 1.0])
    assert m.neighbor[0, 0] == 1 and m.neighbor_face[0, 0] == 1
    assert m.neighbor[1, 1] == 0 and m.neighbor_face[1, 1] == 0
    assert np.all(m.neighbor >= 0)


def test_single_line_element_has_two_boundary_faces():
    m = build_structured_line_mesh(1)
    assert np.all(m.neighbor == -1)


def test_line_192_matches_finest_table_spacing():
    m = build_structured_line_mesh(192)
    assert np.allclose(m.det, 1.0 / 192)


@pytest.mark.parametrize("args", [(0, (0.0, 1.0)), (3, (1.0, 1.0)), (3, (2.0, 1.0))])
def test_line_rejects_bad_input(args):
    with pytest.raises(MeshError):
        build_structured_line_mesh(*args)


def test_single_quad():
    m = build_structured_quad_mesh(1, 1)
    assert m.n_elements == 1 and np.all(m.neighbor == -1)
    assert m.boundary_counts()["outflow"] == 4


def test_quad_dof_count_for_burgers_setting():
    from mcldg.space import DGSpace
    sp = DGSpace(build_structured_quad_mesh(64, 64), 1)
    assert sp.n_dofs == 128 ** 2


def test_double_mach_coarse_mesh_size():
    m = build_structured_quad_mesh(4 * 48, 48, ((0, 4), (0, 1)))
    assert m.n_elements == 4 * 48 ** 2


def test_quad_degenerate_bbox():
    with pytest.raises(MeshError):
        build_structured_quad_mesh(2, 2, ((0, 0), (0, 1)))


def test_quad_callable_boundary_rule():
    m = build_structured_quad_mesh(6, 1, ((0, 1), (0, 1)), {"bottom": lambda x: "wall" if x[0] > 0.5 else "inflow"})
    bottom = m.tag[:, 0]
    assert list(bottom) == [TAG_CODES["inflow"]] * 3 + [TAG_CODES["wall"]] * 3


def test_two_triangle_file():
    m = read_unstructured_tri_mesh(TWO_TRIANGLES)
    assert m.n_elements == 2
    assert np.sum(m.neighbor >= 0) == 2          # one interior face seen from both sides
    assert np.sum(m.neighbor < 0) == 4
    assert m.boundary_counts() == {"inflow": 1, "outflow": 1, "wall": 2}


def test_clockwise_triangle_rejected():
    bad = TWO_TRIANGLES.replace("0 1 2\n", "0 2 1\n")
    with pytest.raises(MeshError, match="negative area"):
        read_unstructured_tri_mesh(bad)


@pytest.mark.parametrize("mutate, msg", [
    (lambda s: s.replace("3 0 inflow", "3 0 sticky"), "unknown boundary tag"),
    (lambda s: s.replace("3 0 inflow\n", ""), "expected"),
    (lambda s: s.replace("0 2 3", "0 2 7"), "unknown vertex"),
])
def test_malformed_files(mutate, msg):
    with pytest.raises(MeshError, match=msg):
        read_unstructured_tri_mesh(mutate(TWO_TRIANGLES))


def test_channel_mesh_tags():
    m = read_unstructured_tri_mesh(generate_channel_mesh(18, 8))
    counts = m.boundary_counts()
    assert counts["inflow"] == 8 and counts["outflow"] == 8
    assert counts["wall"] == 2 * 18
    mids = m.face_midpoints()
    inflow = (m.neighbor < 0) & (m.tag == TAG_CODES["inflow"])
    assert np.allclose(mids[inflow][:, 0], -10.0)


def test_element_geometry():
    J, adj, vol = build_structured_quad_mesh(1, 1).element_geometry(0)
    assert np.allclose(J, np.eye(2)) and vol == pytest.approx(1.0)
    h = 0.25
    J, adj, vol = build_structured_quad_mesh(4, 4).element_geometry(5)
    assert np.allclose(adj, h * np.eye(2)) and vol == pytest.approx(h * h)
    J, adj, vol = read_unstructured_tri_mesh(REFERENCE_TRIANGLE).element_geometry(0)
    assert vol == pytest.approx(0.5)
    assert np.allclose(adj @ J, np.linalg.det(J) * np.eye(2))


@pytest.mark.parametrize("mesh", _all_meshes(), ids=lambda m: m.kind)
def test_mesh_invariants(mesh):
    E, nf = mesh.neighbor.shape
    assert np.all(mesh.det > 0)
    for e in range(E):
        for k in range(nf):
            e2, k2 = mesh.neighbor[e, k], mesh.neighbor_face[e, k]
            if e2 < 0:
                continue
            # pairing is an involution with opposite normals and equal measures
            assert (mesh.neighbor[e2, k2], mesh.neighbor_face[e2, k2]) == (e, k)
            assert np.allclose(mesh.normal[e, k], -mesh.normal[e2, k2], atol=1e-12)
            assert abs(mesh.face_measure[e, k] - mesh.face_measure[e2, k2]) <= 1e-12 * mesh.face_measure[e, k]
    closure = np.einsum("ek,ekd->ed", mesh.face_measure, mesh.normal)
    if mesh.dim > 1:
        assert np.abs(closure).max() < 1e-12
