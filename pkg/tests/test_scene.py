"""Scene parsing/writing, synthetic generation, and SVG rendering."""

import itertools
from types import SimpleNamespace

import numpy as np
import pytest

from dualgraph.errors import GenerationError, SceneFormatError
from dualgraph.generate import GeneratorSpec, generate_scenes, generate_views, sample_camera
from dualgraph.geometry import frame_from_segment, parallel_ratio
from dualgraph.model import builtin_library, fixture_path, load_model, load_model_file
from dualgraph.scene import (
    Primitive,
    Scene,
    parse_scene,
    parse_scene_file,
    render_svg,
    write_scene,
)


def _seg_set(scene, decimals=9):
    out = set()
    for p in scene.primitives:
        assert p.kind == "linseg"
        ends = sorted([tuple(np.round(p.p1, decimals)), tuple(np.round(p.p2, decimals))])
        out.add((ends[0], ends[1]))
    return out


# -- parsing and writing -------------------------------------------------------


def test_parse_minimal_scene():
    s = parse_scene(b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[4,0]}]}')
    assert s.dim == 2
    assert len(s.primitives) == 1
    assert s.primitives[0].kind == "linseg"
    assert s.primitives[0].strength == 1.0
    np.testing.assert_array_equal(s.primitives[0].p2, [4.0, 0.0])


def test_round_trip_is_exact_and_idempotent():
    awkward = [0.1 + 0.2, 1e-17, np.pi, 2.0 / 3.0, -1.2345678901234567e8]
    s = Scene(
        2,
        [
            Primitive("linseg", p1=awkward[:2], p2=awkward[2:4]),
            Primitive("circle", center=[awkward[4], 7.25], radius=0.1 + 0.2, strength=0.625),
        ],
        id="weird",
    )
    blob = write_scene(s)
    back = parse_scene(blob)
    assert back.id == "weird"
    assert back.primitives[0].p1.tolist() == awkward[:2]
    assert back.primitives[0].p2.tolist() == awkward[2:4]
    assert back.primitives[1].center.tolist() == [awkward[4], 7.25]
    assert back.primitives[1].radius == 0.1 + 0.2
    assert back.primitives[1].strength == 0.625
    assert write_scene(back) == blob


def test_round_trip_many_random_coordinates(rng):
    prims = []
    for _ in range(40):
        pts = rng.normal(scale=1e3, size=4) * 10.0 ** rng.integers(-12, 12)
        prims.append(Primitive("linseg", p1=pts[:2], p2=pts[2:]))
    s = Scene(2, prims)
    back = parse_scene(write_scene(s))
    for a, b in zip(s.primitives, back.primitives):
        assert a.p1.tolist() == b.p1.tolist()
        assert a.p2.tolist() == b.p2.tolist()


@pytest.mark.parametrize(
    "blob, fragment",
    [
        (b"{not json", "JSON"),
        (b'{"dim":4,"primitives":[]}', "dim"),
        (b'{"dim":2,"primitives":[{"kind":"blob"}]}', "kind"),
        (b'{"dim":2,"primitives":[{"kind":"circle","center":[0,0],"radius":0}]}', "radius"),
        (b'{"dim":2,"primitives":[{"kind":"circle","center":[0,0],"radius":-2}]}', "radius"),
        (b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[0,0]}]}', "coincide"),
        (b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[1]}]}', "vector"),
        (b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[1,"a"]}]}', "number"),
        (b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[1,1e999]}]}', "finite"),
        (b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[1,0],"x":1}]}', "unknown"),
        (b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[1,0],"strength":1.5}]}', "strength"),
    ],
)
def test_parse_rejections(blob, fragment):
    with pytest.raises(SceneFormatError) as exc:
        parse_scene(blob)
    assert fragment.lower() in str(exc.value).lower()


def test_error_carries_field_path():
    blob = b'{"dim":2,"primitives":[{"kind":"linseg","p1":[0,0],"p2":[4,0]},{"kind":"circle","center":[0,0],"radius":0}]}'
    with pytest.raises(SceneFormatError) as exc:
        parse_scene(blob)
    assert "primitives[1]" in str(exc.value)


def test_missing_file():
    with pytest.raises(SceneFormatError):
        parse_scene_file("/nonexistent/scene.json")


# -- generation ----------------------------------------------------------------


def test_rectangle_zero_jitter_gives_exact_template_segments():
    lib = builtin_library()
    scene = generate_scenes(GeneratorSpec(model=lib, target="rectangle", jitter=0.0))[0]
    assert scene.dim == 3
    expected = {
        ((-1.0, -0.6, 0.0), (1.0, -0.6, 0.0)),
        ((-1.0, 0.6, 0.0), (1.0, 0.6, 0.0)),
        ((-1.0, -0.6, 0.0), (-1.0, 0.6, 0.0)),
        ((1.0, -0.6, 0.0), (1.0, 0.6, 0.0)),
    }
    assert _seg_set(scene) == expected


def test_box_expands_to_twelve_cube_edges():
    lib = builtin_library()
    scene = generate_scenes(GeneratorSpec(model=lib, target="box", jitter=0.0))[0]
    edges = set()
    for span in range(3):
        others = [i for i in range(3) if i != span]
        for a in (-1.0, 1.0):
            for b in (-1.0, 1.0):
                lo = [0.0] * 3
                hi = [0.0] * 3
                lo[span] = -1.0
                hi[span] = 1.0
                lo[others[0]] = hi[others[0]] = a
                lo[others[1]] = hi[others[1]] = b
                ends = sorted([tuple(lo), tuple(hi)])
                edges.add((ends[0], ends[1]))
    assert len(edges) == 12
    assert _seg_set(scene) == edges


def test_truck_variants_share_edges_and_pick_their_trunk():
    g = load_model_file(fixture_path("truck.json"))
    one = generate_scenes(GeneratorSpec(model=g, target="truck1", jitter=0.0))[0]
    two = generate_scenes(GeneratorSpec(model=g, target="truck2", jitter=0.0))[0]
    # cab spans x in [-3,-1]; the long trunk reaches x=3, the short one x=1.4.
    # The four edges on the shared face plane x=-1 collapse: 24 - 4 = 20.
    assert len(one.primitives) == 20
    assert len(two.primitives) == 20
    pts1 = np.vstack([p.points() for p in one.primitives])
    pts2 = np.vstack([p.points() for p in two.primitives])
    np.testing.assert_allclose(pts1.min(axis=0), [-3, -1, -1], atol=1e-12)
    np.testing.assert_allclose(pts1.max(axis=0), [3, 1, 1], atol=1e-12)
    np.testing.assert_allclose(pts2.min(axis=0), [-3, -1, -1], atol=1e-12)
    np.testing.assert_allclose(pts2.max(axis=0), [1.4, 1, 1], atol=1e-12)


def test_face_expansion_mixes_circles_and_segments():
    f = load_model_file(fixture_path("face.json"))
    scene = generate_scenes(GeneratorSpec(model=f, target="face", jitter=0.0))[0]
    kinds = sorted(p.kind for p in scene.primitives)
    assert kinds == ["circle"] * 5 + ["linseg"] * 2
    radii = sorted(p.radius for p in scene.primitives if p.kind == "circle")
    np.testing.assert_allclose(radii, [0.15, 0.15, 0.2, 0.2, 1.0], atol=1e-12)


def test_seeded_determinism():
    g = load_model_file(fixture_path("truck.json"))
    spec = GeneratorSpec(model=g, target="truck1", n_scenes=3, jitter=0.02, n_distractors=6, seed=11)
    a = [write_scene(s) for s in generate_scenes(spec)]
    b = [write_scene(s) for s in generate_scenes(spec)]
    assert a == b
    other = GeneratorSpec(model=g, target="truck1", n_scenes=3, jitter=0.02, n_distractors=6, seed=12)
    assert [write_scene(s) for s in generate_scenes(other)] != a


def test_distractors_append_after_identical_instance():
    lib = builtin_library()
    plain = generate_scenes(GeneratorSpec(model=lib, target="rectangle", jitter=0.01, seed=5))[0]
    spiked = generate_scenes(
        GeneratorSpec(model=lib, target="rectangle", jitter=0.01, n_distractors=8, seed=5)
    )[0]
    assert len(spiked.primitives) == len(plain.primitives) + 8
    for a, b in zip(plain.primitives, spiked.primitives):
        np.testing.assert_array_equal(a.p1, b.p1)
        np.testing.assert_array_equal(a.p2, b.p2)
    pts = np.vstack([p.points() for p in plain.primitives])
    center = (pts.min(axis=0) + pts.max(axis=0)) / 2
    half = np.maximum((pts.max(axis=0) - pts.min(axis=0)) / 2, 0.5) * 1.5
    for extra in spiked.primitives[len(plain.primitives):]:
        mid = (extra.p1 + extra.p2) / 2
        assert np.all(np.abs(mid - center) <= half + 1e-9)


def test_jitter_spreads_size_ratio_around_one():
    lib = builtin_library()
    scenes = generate_scenes(
        GeneratorSpec(model=lib, target="rectangle", n_scenes=120, jitter=0.05, seed=2)
    )
    ratios = []
    for s in scenes:
        lengths = sorted(np.linalg.norm(p.p2 - p.p1) for p in s.primitives)
        ratios.append(lengths[3] / lengths[2])  # the two long sides
    ratios = np.array(ratios)
    assert 1.0 <= ratios.mean() < 1.12
    assert 0.02 < ratios.std() < 0.18


def test_two_views_of_one_instance_agree_on_parallel_ratios():
    g = load_model_file(fixture_path("truck_flat.json"))
    spec = GeneratorSpec(model=g, target="truck1", jitter=0.0, camera="random", seed=3)
    va, vb = generate_views(spec, 2)
    assert va.dim == vb.dim == 2
    assert len(va.primitives) == len(vb.primitives) == 7
    fa = [p.frame() for p in va.primitives]
    fb = [p.frame() for p in vb.primitives]
    checked = 0
    for i, j in itertools.combinations(range(len(fa)), 2):
        try:
            ra = parallel_ratio(fa[i], fa[j], slack=1e-6)
        except Exception:
            continue
        rb = parallel_ratio(fb[i], fb[j], slack=1e-6)
        assert abs(ra - rb) < 1e-9
        checked += 1
    assert checked >= 5


def test_camera_drop_z_keeps_plane_coordinates():
    g = load_model_file(fixture_path("truck_flat.json"))
    flat = generate_scenes(GeneratorSpec(model=g, target="truck1", jitter=0.0))[0]
    dropped = generate_scenes(
        GeneratorSpec(model=g, target="truck1", jitter=0.0, camera="drop-z")
    )[0]
    assert dropped.dim == 2
    for a, b in zip(flat.primitives, dropped.primitives):
        np.testing.assert_allclose(a.p1[:2], b.p1, atol=1e-12)
        np.testing.assert_allclose(a.p2[:2], b.p2, atol=1e-12)


def test_sampled_cameras_are_well_conditioned(rng):
    for _ in range(25):
        cam = sample_camera(rng, "random")
        sv = np.linalg.svd(cam.linear[:, :2], compute_uv=False)
        assert sv[0] / sv[-1] <= 4.0 + 1e-12


def test_generation_errors():
    lib = builtin_library()
    with pytest.raises(GenerationError):
        generate_scenes(GeneratorSpec(model=lib, target="nope"))
    with pytest.raises(GenerationError):
        generate_scenes(GeneratorSpec(model=lib, target="rectangle", jitter=-0.1))
    with pytest.raises(GenerationError):
        generate_scenes(GeneratorSpec(model=lib, target="rectangle", camera="tilt"))
    face = load_model_file(fixture_path("face.json"))
    with pytest.raises(GenerationError):
        generate_scenes(GeneratorSpec(model=face, target="face", camera="random"))
    with pytest.raises(GenerationError):
        generate_views(GeneratorSpec(model=lib, target="rectangle"), 2)
    ghost = load_model({"dim": 2, "root": "ghost", "nodes": [{"type": "ghost"}]})
    with pytest.raises(GenerationError):
        generate_scenes(GeneratorSpec(model=ghost, target="ghost"))


# -- rendering -----------------------------------------------------------------


def _square_scene():
    return Scene(
        2,
        [
            Primitive("linseg", p1=[0, 0], p2=[4, 0]),
            Primitive("linseg", p1=[4, 0], p2=[4, 4]),
            Primitive("linseg", p1=[4, 4], p2=[0, 4]),
            Primitive("linseg", p1=[0, 4], p2=[0, 0], strength=0.3),
        ],
    )


def test_svg_contains_all_primitives_and_is_deterministic():
    scene = _square_scene()
    svg = render_svg(scene)
    assert svg.startswith("<svg")
    assert svg.count("<line") == 4
    assert 'stroke-opacity="0.300000"' in svg
    assert render_svg(scene) == svg


def test_svg_empty_scene():
    svg = render_svg(Scene(2, []))
    assert svg.startswith("<svg")
    assert "<line" not in svg and "<circle" not in svg


def test_svg_rejects_3d():
    with pytest.raises(SceneFormatError):
        render_svg(Scene(3, [Primitive("linseg", p1=[0, 0, 0], p2=[1, 0, 0])]))


def test_svg_overlays_verified_groups():
    scene = _square_scene()
    rect = SimpleNamespace(
        model_type="rectangle",
        instance=1,
        frame=frame_from_segment([0, 2], [4, 2]),
        probability=0.9,
        status="verified",
    )
    child = SimpleNamespace(
        model_type="linseg", instance=1, frame=scene.primitives[0].frame(),
        probability=0.9, status="verified",
    )
    hypo = SimpleNamespace(
        model_type="box", instance=1, frame=rect.frame,
        probability=0.5, status="hypothesized",
    )
    links = [
        SimpleNamespace(kind="part-of", source=("linseg", 1), target=("rectangle", 1)),
        SimpleNamespace(kind="part-of", source=("linseg", 1), target=("box", 1)),
    ]
    ig = SimpleNamespace(
        nodes={
            ("rectangle", 1): rect,
            ("linseg", 1): child,
            ("box", 1): hypo,
        },
        links=links,
    )
    svg = render_svg(scene, ig)
    assert "rectangle 0.90" in svg
    assert "<polygon" in svg
    assert "box" not in svg  # hypothesized nodes stay hidden
