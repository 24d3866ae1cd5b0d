import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hclab.conditions import check_all, sample_params
from hclab.errors import (
    ChannelViolationError,
    InvalidInputError,
    PassageFailure,
    PreconditionError,
)
from hclab.integrator import IntegrationOptions, integrate, neighborhoods
from hclab.manifold import GammaMesh
from hclab.model import vector_field
from hclab.stability import (
    PassageRecord,
    TriangleIndex,
    contraction_experiment,
    distance_brute,
    distance_to_gamma,
    extract_itinerary,
    perturbed_start,
    point_triangle_distance,
    run_trial,
    stability_experiment,
    transition_labels,
    trial_rng,
)

FLOOR = 6.7e-5  # refinement estimate for the 33 x 64 canonical mesh


def flat_mesh(n=3):
    v = np.zeros((4, n))
    v[1, 0] = v[3, 0] = v[2, 1] = v[3, 1] = 1.0
    return GammaMesh(n=n, p=5, vertices=v, tags=np.zeros((4, 3)),
                     triangles=[[0, 1, 3], [0, 3, 2]], provenance=[1, 1])


def sampled_distance(P, A, B, C, m=400):
    g = np.linspace(0, 1, m)
    s, t = np.meshgrid(g, g)
    keep = s + t <= 1
    s, t = s[keep], t[keep]
    pts = A + s[:, None] * (B - A) + t[:, None] * (C - A)
    return np.linalg.norm(pts - P, axis=1).min()


def test_vertices_are_at_zero_distance(canon_mesh, rng):
    idx = rng.choice(canon_mesh.num_vertices, 200, replace=False)
    assert np.abs(distance_to_gamma(canon_mesh.vertices[idx], canon_mesh)).max() < 1e-12


def test_flat_patch_offset():
    M = flat_mesh()
    assert distance_to_gamma([0.3, 0.4, 1e-3], M) == pytest.approx(1e-3, abs=1e-15)
    assert distance_to_gamma([1.5, 0.5, 0.0], M) == pytest.approx(0.5)


def test_offset_out_of_chart_space(canon_mesh):
    # T_1 spans x_1..x_3 only, so a push along x_4 is orthogonal to it
    M = canon_mesh
    k, u, phi = M.tags.T
    inner = np.flatnonzero((k == 1) & (np.abs(u - 0.5) < 0.05) & (phi > 0.5) & (phi < 1.0))
    x = M.vertices[inner[0]].copy()
    x[3] = 1e-3
    assert distance_to_gamma(x, M) == pytest.approx(1e-3, abs=1e-12)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_point_triangle_against_sampling(seed, n):
    r = np.random.default_rng(seed)
    A, B, C, P = r.normal(size=(4, n))
    d = point_triangle_distance(P[None], A[None], B[None], C[None])[0]
    ref = sampled_distance(P, A, B, C)
    scale = max(np.linalg.norm(B - A), np.linalg.norm(C - A))
    assert d <= ref + 1e-12
    assert ref - d <= 2 * scale / 399


def test_degenerate_triangle():
    A, B, C = np.array([[0.0, 0, 0]]), np.array([[1.0, 0, 0]]), np.array([[2.0, 0, 0]])
    P = np.array([[3.0, 1.0, 0.0]])
    assert point_triangle_distance(P, A, B, C)[0] == pytest.approx(np.sqrt(2))
    assert point_triangle_distance(P, A, A, A)[0] == pytest.approx(np.sqrt(10))


def test_empty_mesh_and_bad_points(canon_mesh):
    M = GammaMesh(n=5, p=5, vertices=np.zeros((0, 5)), tags=np.zeros((0, 3)),
                  triangles=np.zeros((0, 3), dtype=int), provenance=[])
    with pytest.raises(InvalidInputError):
        distance_to_gamma(np.zeros(5), M)
    with pytest.raises(InvalidInputError):
        distance_brute(np.zeros(5), M)
    with pytest.raises(InvalidInputError):
        distance_to_gamma(np.zeros(4), canon_mesh)


@settings(max_examples=15)
@given(seed=st.integers(0, 2**32 - 1), scale=st.sampled_from([1e-4, 1e-2, 0.3]))
def test_brute_equals_accelerated(canon_mesh, seed, scale):
    r = np.random.default_rng(seed)
    M = canon_mesh
    base = M.vertices[r.integers(M.num_vertices, size=100)]
    X = np.abs(base + scale * r.normal(size=base.shape))
    assert np.array_equal(distance_brute(X, M), distance_to_gamma(X, M))


def test_brute_equals_accelerated_small_chunks(canon_mesh, rng):
    X = rng.uniform(0, 1, size=(300, 5))
    idx = TriangleIndex(canon_mesh, k_near=1, chunk=37)
    assert np.array_equal(idx.query(X), distance_brute(X, canon_mesh))


def test_distance_lipschitz_along_trajectory(canon, canon_mesh, rng):
    _, x0 = perturbed_start(canon_mesh, 1e-2, rng)
    traj = integrate(canon, x0, 60.0)
    h = 0.05
    ts = np.arange(0, 60.0, h)
    X = traj.at(ts)
    d = distance_to_gamma(X, canon_mesh)
    # max |f| on the box of side sigma bounds the speed
    g = np.linspace(0, 1, 6)
    box = np.stack(np.meshgrid(*[g] * 5), -1).reshape(-1, 5)
    fmax = np.linalg.norm(vector_field(canon, box), axis=1).max()
    assert np.all(np.abs(np.diff(d)) <= fmax * h)
    assert np.all(np.abs(np.diff(d)) <= np.linalg.norm(np.diff(X, axis=0), axis=1) + 1e-15)


def test_transition_labels():
    assert transition_labels((1, 2, 4), 5) == (1, 2)
    assert transition_labels((4, 5, 2, 3), 5) == (1, 2, 1)
    with pytest.raises(ChannelViolationError, match="O_1 -> O_4"):
        transition_labels((1, 4), 5)
    with pytest.raises(ChannelViolationError):
        transition_labels((2, 2), 5)


def test_plane_orbit_itinerary(canon):
    nbs = neighborhoods(canon)
    traj = integrate(canon, [0.85, 1e-4, 0, 0, 0], 200.0, IntegrationOptions(neighborhoods=nbs))
    it = extract_itinerary(traj, canon)
    assert it.saddles == (1, 2) and it.labels == (1,)
    assert np.all(traj.states[:, 2:] == 0)


def test_coordinate_plane_start_converges(canon):
    # on the (1, 3) plane O_3 attracts; the rate is the slowest eigenvalue there
    traj = integrate(canon, [0.4, 0, 0.2, 0, 0], 300.0)
    assert np.all(traj.states[:, [1, 3, 4]] == 0)
    err = np.abs(traj.at([30.0, 60.0, 300.0]) - [0, 0, 1, 0, 0]).max(axis=1)
    assert err[2] < 1e-10
    rate = np.log(err[0] / err[1]) / 30
    assert rate == pytest.approx(0.3, rel=0.05)


def test_both_labels_over_200_starts(canon, canon_mesh):
    nbs = neighborhoods(canon)
    c = {1: 0, 2: 0}
    for i in range(200):
        _, x0 = perturbed_start(canon_mesh, 1e-3, trial_rng(1, i))
        traj = integrate(canon, x0, 300.0, IntegrationOptions(neighborhoods=nbs))
        for key, v in extract_itinerary(traj, canon).counts().items():
            c[key] += v
    assert c[1] > 0 and c[2] > 0


def test_perturbed_start(canon_mesh):
    for i in range(20):
        vi, x = perturbed_start(canon_mesh, 1e-3, trial_rng(0, i))
        v = canon_mesh.vertices[vi]
        assert np.linalg.norm(x - v) == pytest.approx(1e-3, rel=1e-12)
        assert np.all(x >= 0) and canon_mesh.tags[vi, 1] != 0
    a = perturbed_start(canon_mesh, 1e-3, trial_rng(3, 4))
    b = perturbed_start(canon_mesh, 1e-3, trial_rng(3, 4))
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


def test_passage_record_validation():
    r = PassageRecord(1, 1e-3, 1e-4, 1e-3, 1e-5, 12.0)
    assert r.to_dict()["k"] == 1
    with pytest.raises(InvalidInputError):
        PassageRecord(1, -1.0, 1e-4, 1e-3, 1e-5, 12.0)
    with pytest.raises(InvalidInputError):
        PassageRecord(1, 1e-3, 1e-4, 1e-3, 1e-5, 0.0)


def test_contraction_canonical(canon):
    f = contraction_experiment(canon, 1)
    assert 1.35 <= f.s <= 1.65
    assert f.dissipative and f.nu == pytest.approx(1.5, rel=1e-12)
    assert f.e == max(0.0, f.nu - f.s)
    assert f.max_residual < 0.05
    assert all(b > a for a, b in zip(f.T[:-1], f.T[1:]))
    g = contraction_experiment(canon, 1, direction=(0, 1))
    assert abs(g.s - f.s) < 0.1


def test_contraction_non_dissipative(canon):
    f = contraction_experiment(canon.with_rho(4, 1, 1.1), 1)
    assert f.s < 1 and not f.dissipative


@settings(max_examples=5)
@given(seed=st.integers(0, 2**32 - 1))
def test_contraction_exponent_above_one(seed):
    params = sample_params(5, 5, seed)
    rep = check_all(params)
    k = seed % 5 + 1
    assert rep.per_k[k - 1].dissipative_ok
    # the passage estimate is local: shrink the neighbourhood until the
    # orbit stays inside it, offsets scaled with it.  A stable rate close to
    # -sigma_k makes the straightened x_k coordinate ill-conditioned and
    # can demand a very small neighbourhood.
    for frac in 10.0 ** -np.arange(2, 9):
        delta = frac * params.sigma.min()
        try:
            f = contraction_experiment(params, k, delta=delta,
                                       eps_list=[delta * 10.0**-j for j in range(2, 6)])
            break
        except (PassageFailure, PreconditionError):
            continue
    else:
        pytest.fail("no neighbourhood small enough for a clean passage")
    assert f.s > 1


def test_contraction_inputs(canon):
    with pytest.raises(PreconditionError, match="three decades"):
        contraction_experiment(canon, 1, eps_list=(1e-3, 1e-4))
    with pytest.raises(InvalidInputError):
        contraction_experiment(canon, 6)
    with pytest.raises(InvalidInputError):
        contraction_experiment(canon, 1, direction=(-1, 1))


def test_trial_on_mesh_stays_near(canon, canon_mesh):
    r = run_trial(canon, canon_mesh, 0.0, 1, 0, 3, delta=0.1, floor=FLOOR)
    assert r.start_distance == 0.0
    assert r.max_distance <= 2 * FLOOR


def test_small_stability_run(canon, canon_mesh):
    rep = stability_experiment(canon, canon_mesh, 1e-3, laps=1, trials=2, floor=FLOOR)
    assert rep.violations == 0 and rep.timeouts == 0
    for t in rep.trials:
        assert len(t.enter_saddles) == 6 and set(t.itinerary.labels) <= {1, 2}
        assert t.lap_ok == [True] and t.lap_exit[0] <= 0.5 * t.lap_entry[0]
        for rec in t.passages:
            assert rec.exit_distance <= 2 * rec.entry_distance + 2 * FLOOR
    d = rep.to_dict()
    assert d["summary"]["trials"] == 2 and len(d["trials"]) == 2
    again = stability_experiment(canon, canon_mesh, 1e-3, laps=1, trials=2, floor=FLOOR)
    assert again.to_dict() == d


def test_stability_inputs(canon, canon_mesh):
    with pytest.raises(PreconditionError):
        stability_experiment(canon.with_rho(4, 1, 1.1), canon_mesh, trials=1, floor=FLOOR)
    with pytest.raises(InvalidInputError):
        stability_experiment(canon, canon_mesh, -1e-3, trials=1, floor=FLOOR)
    with pytest.raises(InvalidInputError):
        stability_experiment(sample_params(6, 6, 0), canon_mesh, trials=1, floor=FLOOR)
