import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hclab.conditions import sample_params
from hclab.errors import (
    InvalidInputError,
    InvalidMeshError,
    MeshConsistencyError,
    PreconditionError,
    TraceFailure,
    UnsupportedCycleError,
)
from hclab.manifold import (
    GammaMesh,
    build_gamma,
    chart_map,
    classify_combinatorial,
    classify_topology,
    classify_triangles,
    trace_all,
    trace_edge,
    trace_fan,
)
from hclab.manifold.mesh import row_spacing
from hclab.model import wrap


def band(N, twist):
    """Closed band of N quads; the last quad is glued with a half twist
    when ``twist`` is set."""
    cols = [(i, N + i) for i in range(N)]
    cols.append((N, 0) if twist else (0, N))
    tris = []
    for (a0, b0), (a1, b1) in zip(cols[:-1], cols[1:]):
        tris += [(a0, a1, b0), (a1, b1, b0)]
    return np.array(tris)


@pytest.mark.parametrize("p", range(4, 13))
def test_combinatorial_table(p):
    r = classify_combinatorial(p)
    if p == 4:
        # the four faces (k, k+1, k+2) are those of a tetrahedron
        assert (r.classification, r.boundary_components, r.euler_characteristic) == ("Other", 0, 2)
        return
    assert r.euler_characteristic == 0
    if p % 2:
        assert (r.classification, r.boundary_components, r.orientable) == ("MobiusStrip", 1, False)
    else:
        assert (r.classification, r.boundary_components, r.orientable) == ("Cylinder", 2, True)


def test_combinatorial_rejects_small_p():
    with pytest.raises(UnsupportedCycleError):
        classify_combinatorial(3)
    with pytest.raises(InvalidInputError):
        classify_combinatorial(2)


def test_handmade_surfaces():
    assert classify_triangles(band(5, False)).classification == "Cylinder"
    assert classify_triangles(band(5, True)).classification == "MobiusStrip"
    disk = classify_triangles([[0, 1, 2]])
    assert (disk.boundary_components, disk.orientable, disk.euler_characteristic,
            disk.classification) == (1, True, 1, "Other")
    sphere = classify_triangles([[0, 1, 2], [0, 3, 1], [1, 3, 2], [2, 3, 0]])
    assert (sphere.boundary_components, sphere.euler_characteristic) == (0, 2)


@given(N=st.integers(3, 12), twist=st.booleans(), data=st.data())
def test_classification_ignores_winding(N, twist, data):
    tris = band(N, twist)
    flip = np.array(data.draw(st.lists(st.booleans(), min_size=len(tris), max_size=len(tris))))
    tris[flip] = tris[flip][:, ::-1]
    perm = np.array(data.draw(st.permutations(range(2 * N))))
    r = classify_triangles(perm[tris])
    assert r.classification == ("MobiusStrip" if twist else "Cylinder")


def test_invalid_meshes():
    with pytest.raises(InvalidMeshError, match="triangles"):
        classify_triangles([[0, 1, 2], [0, 1, 3], [1, 0, 4]])
    with pytest.raises(InvalidMeshError):
        classify_triangles([[0, 0, 1]])
    with pytest.raises(InvalidMeshError):
        classify_triangles(np.zeros((0, 3), dtype=int))


def test_chart_map_examples():
    b = 0.4
    assert chart_map(b, np.pi / 2, b)[1] == pytest.approx(0.5)
    u = np.linspace(0, 1, 11)
    assert np.all(chart_map(u, 0.0, b)[1] == 0)
    assert np.all(chart_map(1.0, np.linspace(0, np.pi / 2, 7), b)[1] == 0)


@given(b=st.floats(0.05, 0.95))
def test_chart_map_injective_into_triangle(b):
    g = np.linspace(0, 1, 41)[1:-1]
    U, PHI = np.meshgrid(g, g * np.pi / 2)
    u, v = chart_map(U, PHI, b)
    # inside the closed triangle A=(0,0), B=(b,1/2), C=(1,0)
    assert np.all(v >= 0)
    assert np.all(v <= np.where(u <= b, u / (2 * b), (1 - u) / (2 * (1 - b))) + 1e-12)
    pts = np.round(np.column_stack([u.ravel(), v.ravel()]), 12)
    assert np.unique(pts, axis=0).shape[0] == pts.shape[0]


def test_edge_orbit(canon):
    e = trace_edge(canon, 1, 3)
    assert np.array_equal(e.points[0], [1.0, 0.0])
    assert np.array_equal(e.points[-1], [0.0, 1.0])
    assert e.length > 1.0


def test_fan_boundary_rows(canon):
    f = trace_fan(canon, 1, 9)
    assert f.angles[0] == 0 and f.angles[-1] == np.pi / 2
    assert np.all(np.diff(f.angles) > 0)
    assert np.all(f.orbits[0][:, 1] == 0)
    assert np.array_equal(f.orbits[0][-1], [0, 0, 1])
    last = f.orbits[-1]
    assert np.all(last[: f.split + 1, 2] == 0)
    assert np.array_equal(last[f.split], [0, 1, 0])
    assert f.D_pi2 == pytest.approx(f.arclengths[-1])
    for o in f.orbits:
        assert np.abs(o[-1] - [0, 0, 1]).max() < 1e-6


def test_fan_interior_orbits_stay_in_triple(canon):
    f = trace_fan(canon, 2, 5)
    for o in f.orbits[1:-1]:
        assert np.all(o[1:-1] > 0)


def test_fan_continuity_under_refinement(canon):
    gaps = [row_spacing(trace_fan(canon, 1, m)) for m in (9, 17, 33)]
    assert gaps[1] < 0.7 * gaps[0] and gaps[2] < 0.7 * gaps[1]


def test_arclength_refinement(canon):
    a = trace_fan(canon, 1, 9, spacing="uniform")
    b = trace_fan(canon, 1, 9, spacing="uniform", gap=5e-4)
    assert np.abs(b.arclengths / a.arclengths - 1).max() < 1e-2
    A = build_gamma(canon, 17, 32).area()
    B = build_gamma(canon, 33, 64).area()
    assert abs(A / B - 1) < 1e-2


def test_fan_preconditions(canon):
    with pytest.raises(PreconditionError):
        trace_fan(canon, 1, 2)
    with pytest.raises(PreconditionError):
        trace_fan(canon, 6, 5)
    with pytest.raises(PreconditionError):
        trace_fan(canon, 1, 5, spacing="random")
    with pytest.raises(InvalidInputError):
        build_gamma(canon, 5, 3)


def test_p4_edge_does_not_close():
    with pytest.raises(TraceFailure, match="O_3"):
        trace_fan(sample_params(4, 4, 0), 1, 5)


def test_stitch_mismatch(canon):
    fans = trace_all(canon, 5)
    fans[1] = trace_fan(canon.with_rho(3, 2, 0.8), 2, 5)
    with pytest.raises(MeshConsistencyError, match="Gamma_2,3"):
        build_gamma(canon, 5, 8, fans=fans)


def test_canonical_mesh_topology(canon_mesh):
    r = classify_topology(canon_mesh)
    assert r.to_dict() == {"classification": "MobiusStrip", "boundary_components": 1,
                           "orientable": False, "euler": 0}
    edges, inc, _ = canon_mesh.edge_adjacency()
    assert inc[:, 0].min() >= 0


def test_canonical_mesh_support_and_saddles(canon, canon_mesh):
    M = canon_mesh
    assert M.p == 5 and len(M.charts) == 5 and M.m_arc == 64
    for k in range(1, 6):
        faces = M.triangles[M.provenance == k]
        off = [wrap(k + i, 5) - 1 for i in range(3, 5)]
        assert np.all(M.vertices[np.unique(faces)][:, off] == 0)
        o = np.zeros(5)
        o[k - 1] = 1.0
        assert np.array_equal(M.vertices[M.saddle_vertex(k)], o)
    assert np.all(M.vertices >= 0) and np.all(M.vertices <= canon.sigma)


def test_boundary_is_the_skip_edges(canon_mesh):
    M = canon_mesh
    edges, inc, _ = M.edge_adjacency()
    bnd = inc[:, 1] < 0
    assert bnd.sum() == M.p * (M.m_arc - 1)
    for (i, j), f in zip(edges[bnd], inc[bnd, 0]):
        k = M.provenance[f]
        # both ends lie on Gamma_{k,k+2}: x_{k+1} = 0 inside the chart
        assert M.vertices[i, wrap(k + 1, 5) - 1] == 0
        assert M.vertices[j, wrap(k + 1, 5) - 1] == 0


def test_charts_meet_along_shared_edges(canon_mesh):
    M = canon_mesh
    edges, inc, _ = M.edge_adjacency()
    both = inc[:, 1] >= 0
    pa, pb = M.provenance[inc[both, 0]], M.provenance[inc[both, 1]]
    cross = pa != pb
    assert cross.any()
    for (i, j), a, b in zip(edges[both][cross], pa[cross], pb[cross]):
        if wrap(a + 1, 5) != b:
            a, b = b, a
        assert wrap(a + 1, 5) == b
        # T_a and T_{a+1} share Gamma_{a+1,a+2}
        support = {b - 1, wrap(b + 1, 5) - 1}
        for v in (i, j):
            assert set(np.flatnonzero(M.vertices[v])) <= support


def test_mesh_json_and_obj(canon, tmp_path):
    M = build_gamma(canon, 5, 8)
    path = tmp_path / "g.json"
    M.save_json(path)
    N = GammaMesh.load_json(path)
    for name in ("vertices", "tags", "triangles", "provenance"):
        assert np.array_equal(getattr(M, name), getattr(N, name))
    assert N.m_arc == 8 and N.charts == M.charts
    obj = M.to_obj()
    assert sum(line.startswith("f ") for line in obj.splitlines()) == M.num_triangles
    assert sum(line.startswith("g ") for line in obj.splitlines()) == 5


def test_mesh_from_bad_dict():
    with pytest.raises(InvalidInputError):
        GammaMesh.from_dict({"n": 5})
    with pytest.raises(InvalidInputError):
        GammaMesh(n=3, p=3, vertices=np.zeros((2, 3)), tags=np.zeros((2, 3)),
                  triangles=[[0, 1, 2]], provenance=[1])


def test_p6_mesh_is_cylinder():
    M = build_gamma(sample_params(6, 6, 0), 9, 16)
    r = classify_topology(M)
    assert (r.classification, r.boundary_components) == ("Cylinder", 2)
