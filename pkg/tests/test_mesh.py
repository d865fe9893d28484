import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vclod import corpus
from vclod.mesh import (MeshError, ObjParseError, TriangleMesh, closest_point_on_triangle,
                        load_obj, mean_squared_deviation, metrics, save_obj,
                        squared_distance_to_surface)

ALL_MESHES = corpus.small_corpus() + corpus.planar_corpus()


def write(tmp_path, text, name="m.obj"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_minimal(tmp_path):
    p = write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    m = load_obj(p)
    assert m.vertex_count == 3
    assert m.triangles.tolist() == [[0, 1, 2]]


def test_load_out_of_range(tmp_path):
    p = write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 5\n")
    with pytest.raises(MeshError):
        load_obj(p)


def test_load_quad_fan(tmp_path):
    p = write(tmp_path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    m = load_obj(p)
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_load_ignores_other_records(tmp_path):
    text = ("# comment\nmtllib x.mtl\no thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\n"
            "vn 0 0 1\nvt 0 0\ng grp\nusemtl m\ns 1\nf 1/1/1 2/1/1 -1/1/1\n")
    m = load_obj(write(tmp_path, text))
    assert m.triangles.tolist() == [[0, 1, 2]]


def test_parse_error_has_line_number(tmp_path):
    p = write(tmp_path, "v 0 0 0\nv 1 zero 0\n")
    with pytest.raises(ObjParseError) as exc:
        load_obj(p)
    assert exc.value.line_number == 2


def test_round_trip_minimal(tmp_path):
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    save_obj(m, tmp_path / "a.obj")
    assert load_obj(tmp_path / "a.obj").triangles.tolist() == [[0, 1, 2]]


def test_round_trip_statue(tmp_path):
    s = corpus.statue()
    save_obj(s, tmp_path / "s.obj")
    back = load_obj(tmp_path / "s.obj")
    assert back.triangle_count == 12074
    np.testing.assert_allclose(back.vertices, s.vertices, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("m", ALL_MESHES, ids=lambda m: m.name)
def test_round_trip_corpus(tmp_path, m):
    save_obj(m, tmp_path / "c.obj")
    back = load_obj(tmp_path / "c.obj")
    assert back.triangle_count == m.triangle_count
    assert back.vertex_count == m.vertex_count
    assert np.array_equal(back.triangles, m.triangles)
    np.testing.assert_allclose(back.vertices, m.vertices, rtol=1e-8, atol=1e-12)


def test_save_empty_fails(tmp_path):
    with pytest.raises(MeshError):
        save_obj(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3))), tmp_path / "e.obj")


def test_save_unwritable(tmp_path):
    with pytest.raises(OSError):
        save_obj(corpus.quad(), tmp_path / "missing" / "dir" / "q.obj")


def test_invariants_enforced():
    with pytest.raises(MeshError):
        TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])
    with pytest.raises(MeshError):
        TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 1]])
    with pytest.raises(MeshError):
        TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]]).validate()


def test_metrics_area():
    tri = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert metrics(tri).surface_area == pytest.approx(0.5)
    two = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5], [6, 5, 5], [5, 6, 5]],
                       [[0, 1, 2], [3, 4, 5]])
    mm = metrics(two)
    assert mm.surface_area == pytest.approx(1.0)
    assert mm.triangle_count == 2 and mm.vertex_count == 6
    assert mm.bounding_box == ((0.0, 0.0, 0.0), (6.0, 6.0, 5.0))


def test_metrics_statue():
    assert metrics(corpus.statue()).triangle_count == 12074


def test_statue_is_closed_and_consistently_oriented():
    t = corpus.statue().triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    assert len(np.unique(directed, axis=0)) == len(directed)
    undirected, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    assert set(counts.tolist()) == {2}


@pytest.mark.parametrize("m", ALL_MESHES, ids=lambda m: m.name)
def test_metrics_permutation_invariant(m):
    perm = np.random.default_rng(3).permutation(m.triangle_count)
    shuffled = TriangleMesh(m.vertices, m.triangles[perm])
    a, b = metrics(m), metrics(shuffled)
    assert a.triangle_count == b.triangle_count
    assert a.surface_area == pytest.approx(b.surface_area, rel=1e-12)
    assert a.bounding_box == b.bounding_box


@pytest.mark.parametrize("m", ALL_MESHES, ids=lambda m: m.name)
def test_deviation_self_is_zero(m):
    assert mean_squared_deviation(m, m, 300, seed=1) < 1e-12


def test_deviation_constant_offset():
    assert mean_squared_deviation(corpus.quad(0.0), corpus.quad(0.1), 500) == pytest.approx(
        0.01, abs=1e-12)


def test_deviation_is_seed_deterministic():
    s = corpus.icosphere(2)
    r = corpus.icosphere(1)
    assert mean_squared_deviation(r, s, 200, seed=5) == mean_squared_deviation(r, s, 200, seed=5)


def test_deviation_empty_mesh():
    empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(MeshError):
        mean_squared_deviation(empty, corpus.quad(), 10)


def _brute_sq_distance(p, mesh, n=60):
    # dense barycentric sampling of every triangle; upper bound converging to truth
    best = np.inf
    u, v = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n))
    keep = u + v <= 1
    u, v = u[keep], v[keep]
    for a, b, c in zip(*mesh.corners()):
        pts = a + u[:, None] * (b - a) + v[:, None] * (c - a)
        best = min(best, float(np.min(np.sum((pts - p) ** 2, axis=1))))
    return best


@settings(max_examples=40, deadline=None)
@given(st.tuples(*[st.floats(-2, 2)] * 3))
def test_closest_point_matches_dense_sampling(p):
    m = corpus.icosphere(0)
    p = np.array(p)
    exact = squared_distance_to_surface(p[None], m)[0]
    brute = _brute_sq_distance(p, m)
    assert exact <= brute + 1e-12
    assert brute - exact < 5e-3


def test_closest_point_regions():
    a, b, c = np.array([[0, 0, 0.]]), np.array([[1, 0, 0.]]), np.array([[0, 1, 0.]])
    cases = {(-1, -1, 0): (0, 0, 0), (2, -1, 0): (1, 0, 0), (-1, 2, 0): (0, 1, 0),
             (0.5, -1, 3): (0.5, 0, 0), (-1, 0.5, 0): (0, 0.5, 0),
             (1, 1, 0): (0.5, 0.5, 0), (0.2, 0.2, 5): (0.2, 0.2, 0)}
    for p, q in cases.items():
        got = closest_point_on_triangle(np.array([p], float), a, b, c)[0]
        np.testing.assert_allclose(got, q, atol=1e-12)
