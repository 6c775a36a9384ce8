import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualgraph.errors import (
    ArityError,
    DegenerateFrameError,
    UnderConstrainedError,
)
from dualgraph.geometry import (
    AffineCamera,
    Frame,
    angle_between,
    boundary_distance,
    canonicalize_frame,
    embed_frame,
    estimate_transform,
    eval_relation,
    fit_affine,
    fit_similarity,
    frame_from_circle,
    frame_from_segment,
    parallel_ratio,
    pose_vector,
    project,
    symmetry_orbit,
)
from conftest import random_frame, random_rotation


# -- Frame construction -------------------------------------------------------

def test_frame_rejects_non_orthogonal_axes():
    with pytest.raises(DegenerateFrameError):
        Frame([0.0, 0.0], [[1.0, 0.0], [0.5, 1.0]])


def test_frame_rejects_non_finite():
    with pytest.raises(DegenerateFrameError):
        Frame([0.0, np.nan], np.eye(2))


def test_segment_frame_midpoint_and_half_axis():
    f = frame_from_segment([0.0, 0.0], [4.0, 0.0])
    assert np.allclose(f.origin, [2.0, 0.0])
    assert f.primary_length == pytest.approx(2.0)
    # cross axis carries no extent
    assert sorted(f.lengths) == pytest.approx([0.0, 2.0])


def test_circle_frame_is_radius_times_identity():
    f = frame_from_circle([1.0, -2.0], 0.5)
    assert np.allclose(f.axes, np.eye(2) * 0.5)
    with pytest.raises(DegenerateFrameError):
        frame_from_circle([0.0, 0.0], 0.0)


# -- canonicalization ---------------------------------------------------------

def test_box_orbit_collapses_to_one_representative(rng):
    f = random_frame(rng, dim=3, lengths=[3.0, 2.0, 1.0])
    orbit = symmetry_orbit(f, "box")
    assert len(orbit) == 48
    reps = [canonicalize_frame(g, "box") for g in orbit]
    base = reps[0]
    for rep in reps[1:]:
        assert np.array_equal(rep.origin, base.origin)
        assert np.array_equal(rep.axes, base.axes)


def test_segment_and_rectangle_orbits(rng):
    seg = frame_from_segment(rng.uniform(-1, 1, 2), rng.uniform(2, 3, 2))
    orbit = symmetry_orbit(seg, "undirected-segment")
    assert len(orbit) == 2
    reps = [canonicalize_frame(g, "undirected-segment").axes for g in orbit]
    assert np.array_equal(reps[0], reps[1])

    rect = random_frame(rng, dim=2, lengths=[2.0, 1.0])
    orbit = symmetry_orbit(rect, "rectangle")
    assert len(orbit) == 4
    reps = [canonicalize_frame(g, "rectangle").axes for g in orbit]
    for axes in reps[1:]:
        assert np.array_equal(axes, reps[0])


def test_canonicalize_circle_reduces_to_radius():
    rot = random_rotation(np.random.default_rng(7), 2)
    f = Frame([0.0, 1.0], np.diag([0.8, 0.8]) @ rot)
    c = canonicalize_frame(f, "circle")
    assert np.allclose(c.axes, np.eye(2) * 0.8)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_canonicalize_idempotent(seed):
    rng = np.random.default_rng(seed)
    for sym, dim in (("undirected-segment", 2), ("rectangle", 2), ("box", 3), ("none", 3)):
        f = random_frame(rng, dim=dim)
        if sym == "undirected-segment":
            f = frame_from_segment(rng.uniform(-1, 1, 2), rng.uniform(1, 2, 2))
        once = canonicalize_frame(f, sym)
        twice = canonicalize_frame(once, sym)
        assert np.array_equal(once.axes, twice.axes)
        assert np.array_equal(once.origin, twice.origin)


def test_canonicalize_rejects_degenerate_frames():
    seg = frame_from_segment([0.0, 0.0], [2.0, 0.0])
    # a segment is fine as a segment but cannot act as a rectangle
    canonicalize_frame(seg, "undirected-segment")
    with pytest.raises(DegenerateFrameError):
        canonicalize_frame(seg, "rectangle")
    with pytest.raises(DegenerateFrameError):
        canonicalize_frame(Frame([0.0, 0.0], np.zeros((2, 2))), "undirected-segment")


# -- relation functions -------------------------------------------------------

def test_size_ratio_primary_lengths():
    cab = Frame([0.0, 0.0], np.diag([4.0, 1.0]))
    trunk = Frame([6.0, 0.0], np.diag([2.0, 1.0]))
    assert eval_relation("size-ratio", [cab, trunk]) == pytest.approx(2.0)


def test_distance_ratio_hand_value():
    # origins 3 apart, first primary length 2 -> 3/2
    a = Frame([0.0, 0.0], np.diag([2.0, 0.5]))
    b = Frame([3.0, 0.0], np.diag([1.0, 0.25]))
    assert eval_relation("distance-ratio", [a, b]) == pytest.approx(1.5)


def test_angle_perpendicular_segments():
    a = frame_from_segment([0, 0], [2, 0])
    b = frame_from_segment([0, 0], [0, 3])
    assert eval_relation("angle", [a, b]) == pytest.approx(np.pi / 2)
    # angle is direction-blind: anti-parallel reads as parallel
    c = frame_from_segment([5, 5], [3, 5])
    d = frame_from_segment([0, 0], [2, 0])
    assert eval_relation("angle", [c, d]) == pytest.approx(0.0)


def test_parallel_and_touch_booleans():
    a = frame_from_segment([0, 0], [2, 0])
    b = frame_from_segment([2.01, 0], [4, 0])
    assert eval_relation("touch", [a, b], slack=0.05) is True
    assert eval_relation("touch", [a, b], slack=0.001) is False
    assert eval_relation("parallel", [a, b], slack=0.01) is True


def test_inside_relation():
    outer = Frame([0.0, 0.0], np.diag([2.0, 2.0]))
    inner = frame_from_segment([-1.0, 0.5], [1.0, 0.5])
    assert eval_relation("inside", [outer, inner], slack=0.01) is True
    poking = frame_from_segment([-1.0, 0.5], [3.0, 0.5])
    assert eval_relation("inside", [outer, poking], slack=0.01) is False


def test_pose_vector_units():
    a = Frame([0.0, 0.0], np.diag([2.0, 1.0]))
    b = Frame([1.0, 0.5], np.diag([0.2, 0.1]))
    v = pose_vector(a, b)
    assert v == pytest.approx([0.5, 0.5])


def test_relation_errors():
    seg = frame_from_segment([0, 0], [1, 0])
    point_like = Frame([0.0, 0.0], np.zeros((2, 2)))
    with pytest.raises(DegenerateFrameError):
        eval_relation("size-ratio", [seg, point_like])
    with pytest.raises(ArityError):
        eval_relation("angle", [seg])
    with pytest.raises(ValueError):
        eval_relation("no-such-relation", [seg, seg])


def test_scalar_relations_similarity_invariant(rng):
    # applying one similarity to both frames must not move the values
    for _ in range(50):
        a = random_frame(rng, 2)
        b = random_frame(rng, 2)
        rot = random_rotation(rng, 2)
        s = rng.uniform(0.3, 2.5)
        t = rng.uniform(-4, 4, 2)

        def move(f):
            return Frame(s * (rot @ f.origin) + t, s * (f.axes @ rot.T))

        for fn in ("size-ratio", "distance-ratio", "angle"):
            v1 = eval_relation(fn, [a, b])
            v2 = eval_relation(fn, [move(a), move(b)])
            assert abs(v1 - v2) < 1e-9


# -- boundary distance oracle -------------------------------------------------

def test_boundary_distance_axis_aligned_gap():
    a = Frame([0.0, 0.0], np.eye(2))          # square [-1,1]^2
    b = Frame([3.3, 0.0], np.eye(2))          # square [2.3,4.3] x [-1,1]
    assert boundary_distance(a, b) == pytest.approx(1.3, abs=1e-8)


def test_boundary_distance_overlap_is_zero():
    a = Frame([0.0, 0.0], np.eye(2))
    b = Frame([0.5, 0.5], np.eye(2))
    assert boundary_distance(a, b) == pytest.approx(0.0, abs=1e-9)


def test_boundary_distance_corner_to_corner():
    a = Frame([0.0, 0.0], np.eye(2))
    b = Frame([2.2, 2.2], np.eye(2))
    # nearest corners (1,1) and (1.2,1.2)
    assert boundary_distance(a, b) == pytest.approx(np.sqrt(2) * 0.2, abs=1e-7)


def test_boundary_distance_segment_to_segment():
    a = frame_from_segment([0, 0], [2, 0])
    b = frame_from_segment([1, 1], [1, 3])
    assert boundary_distance(a, b) == pytest.approx(1.0, abs=1e-8)


# -- transforms ---------------------------------------------------------------

def test_estimate_transform_exact_similarity(rng):
    theta = 0.7
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    s = 1.7
    t = np.array([2.0, -1.0])
    m1 = random_frame(rng, 2)
    m2 = random_frame(rng, 2)

    def move(f):
        return Frame(s * (rot @ f.origin) + t, s * (f.axes @ rot.T))

    xform, residual = estimate_transform([m1, m2], [move(m1), move(m2)])
    assert residual == pytest.approx(0.0, abs=1e-9)
    assert xform.scale == pytest.approx(s)
    assert np.allclose(xform.rotation, rot, atol=1e-9)
    assert np.allclose(xform.translation, t, atol=1e-9)


def _similarity_lsq_oracle(model_pts, image_pts):
    """Independent 2D fit: x' = a x - b y + tx, y' = b x + a y + ty."""
    rows = []
    rhs = []
    for (x, y), (xp, yp) in zip(model_pts, image_pts):
        rows.append([x, -y, 1.0, 0.0])
        rhs.append(xp)
        rows.append([y, x, 0.0, 1.0])
        rhs.append(yp)
    sol, res2, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    fitted = np.array(rows) @ sol
    return float(np.sqrt(((fitted - np.array(rhs)) ** 2).sum()))


def test_estimate_transform_residual_matches_lsq_oracle(rng):
    for _ in range(20):
        m1 = random_frame(rng, 2)
        m2 = random_frame(rng, 2)
        theta = rng.uniform(0, 2 * np.pi)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        s = rng.uniform(0.5, 2.0)
        t = rng.uniform(-3, 3, 2)

        def move(f):
            return Frame(s * (rot @ f.origin) + t, s * (f.axes @ rot.T))

        i1, i2 = move(m1), move(m2)
        # jitter the image origins by 0.01
        i1 = Frame(i1.origin + rng.normal(0, 0.01, 2), i1.axes)
        i2 = Frame(i2.origin + rng.normal(0, 0.01, 2), i2.axes)
        xform, residual = estimate_transform([m1, m2], [i1, i2])

        model_pts = [m1.origin, m1.origin + m1.primary_axis, m2.origin, m2.origin + m2.primary_axis]
        image_pts = [i1.origin, i1.origin + i1.primary_axis, i2.origin, i2.origin + i2.primary_axis]
        oracle = _similarity_lsq_oracle(model_pts, image_pts)
        assert residual == pytest.approx(oracle, abs=1e-9)


def test_estimate_transform_coincident_origins_error():
    a = Frame([0.0, 0.0], np.diag([1.0, 0.5]))
    b = Frame([0.0, 0.0], np.diag([2.0, 1.0]))
    with pytest.raises(UnderConstrainedError):
        estimate_transform([a, a], [b, b])


def test_fit_similarity_three_dimensional(rng):
    rot = random_rotation(rng, 3)
    s = 1.3
    t = rng.uniform(-2, 2, 3)
    pts = rng.uniform(-2, 2, size=(5, 3))
    moved = s * (rot @ pts.T).T + t
    xform, residual = fit_similarity(pts, moved)
    assert residual == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(xform.rotation, rot, atol=1e-8)


# -- affine invariants --------------------------------------------------------

def test_parallel_ratio_affine_invariant():
    rng = np.random.default_rng(11)
    base_a = frame_from_segment([0.0, 0.0, 0.0], [3.0, 1.0, 0.5])
    base_b = frame_from_segment([1.0, 4.0, -1.0], [1.0 + 1.5, 4.0 + 0.5, -1.0 + 0.25])
    want = parallel_ratio(base_a, base_b)
    assert want == pytest.approx(2.0)
    for _ in range(1000):
        lin = rng.normal(size=(3, 3)) + np.eye(3)
        if abs(np.linalg.det(lin)) < 1e-3:
            continue
        t = rng.uniform(-5, 5, 3)

        def move_seg(f):
            p1 = f.origin - f.primary_axis
            p2 = f.origin + f.primary_axis
            return frame_from_segment(lin @ p1 + t, lin @ p2 + t)

        got = parallel_ratio(move_seg(base_a), move_seg(base_b), slack=1e-6)
        assert abs(got - want) < 1e-9


def test_parallel_ratio_rejects_non_parallel():
    a = frame_from_segment([0, 0], [1, 0])
    b = frame_from_segment([0, 0], [1, 1])
    with pytest.raises(DegenerateFrameError):
        parallel_ratio(a, b)


def test_fit_affine_exact(rng):
    lin = rng.normal(size=(2, 3))
    lin[0, 0] += 1.0
    lin[1, 1] += 1.0
    t = rng.uniform(-2, 2, 2)
    pts = rng.uniform(-3, 3, size=(6, 3))
    image = (lin @ pts.T).T + t
    (got_lin, got_t), residual = fit_affine(pts, image)
    assert residual == pytest.approx(0.0, abs=1e-8)
    assert np.allclose(got_lin, lin, atol=1e-8)
    assert np.allclose(got_t, t, atol=1e-8)


# -- projection ---------------------------------------------------------------

def _random_camera(rng):
    rot = random_rotation(rng, 3)
    lin = rot[:2] * rng.uniform(0.6, 1.4)
    shear = np.array([[1.0, rng.uniform(-0.3, 0.3)], [0.0, 1.0]])
    return AffineCamera(shear @ lin, rng.uniform(-1, 1, 2))


def test_project_keeps_parallel_segments_parallel(rng):
    for _ in range(200):
        cam = _random_camera(rng)
        d = rng.uniform(-1, 1, 3)
        d /= np.linalg.norm(d)
        a = frame_from_segment([0, 0, 0], 2.0 * d)
        off = rng.uniform(-3, 3, 3)
        b = frame_from_segment(off, off + 0.7 * d)
        pa = project(cam, a)
        pb = project(cam, b)
        if pa.primary_length < 1e-3 or pb.primary_length < 1e-3:
            continue
        assert angle_between(pa, pb) < 1e-9


def test_project_segment_matches_projected_endpoints(rng):
    cam = _random_camera(rng)
    seg = frame_from_segment([1.0, 2.0, 3.0], [4.0, 0.0, -1.0])
    proj = project(cam, seg)
    p1 = cam.apply_points(seg.origin - seg.primary_axis)[0]
    p2 = cam.apply_points(seg.origin + seg.primary_axis)[0]
    assert np.allclose(proj.origin, (p1 + p2) / 2, atol=1e-9)
    assert proj.primary_length == pytest.approx(np.linalg.norm(p2 - p1) / 2, abs=1e-9)


def test_project_orthogonal_case_exact():
    # camera that keeps x and y: a flat rectangle projects to itself
    cam = AffineCamera(np.array([[1.0, 0, 0], [0, 1.0, 0]]), np.zeros(2))
    rect = Frame([0.5, -0.5, 2.0], np.array([[2.0, 0, 0], [0, 1.0, 0], [0, 0, 0.0]]))
    proj = project(cam, rect)
    assert np.allclose(proj.origin, [0.5, -0.5])
    assert sorted(proj.lengths) == pytest.approx([1.0, 2.0])


def test_embed_frame_pads_with_zeros():
    f = Frame([1.0, 2.0], np.diag([2.0, 1.0]))
    g = embed_frame(f, 3)
    assert g.dim == 3
    assert np.allclose(g.origin, [1.0, 2.0, 0.0])
    assert np.allclose(g.axes[2], 0.0)
    with pytest.raises(DegenerateFrameError):
        embed_frame(g, 2)
