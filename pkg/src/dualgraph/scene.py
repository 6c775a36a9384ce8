"""Scene documents: typed primitives, JSON parsing/writing, SVG rendering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneFormatError
from .geometry import Frame, frame_from_circle, frame_from_segment

PRIMITIVE_KINDS = ("linseg", "circle")


@dataclass
class Primitive:
    """One observed feature: a line segment or a circle.

    `strength` carries the detector's confidence in [0, 1]; a faint or partly
    occluded feature enters inference with a weaker data prior.
    """

    kind: str
    p1: np.ndarray | None = None
    p2: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float | None = None
    strength: float = 1.0

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise SceneFormatError(f"unknown primitive kind {self.kind!r}")
        if self.kind == "linseg":
            self.p1 = np.asarray(self.p1, float)
            self.p2 = np.asarray(self.p2, float)
        else:
            self.center = np.asarray(self.center, float)
            self.radius = float(self.radius)

    @property
    def dim(self) -> int:
        return int(self.p1.size if self.kind == "linseg" else self.center.size)

    def frame(self) -> Frame:
        if self.kind == "linseg":
            return frame_from_segment(self.p1, self.p2)
        return frame_from_circle(self.center, self.radius)

    def points(self) -> np.ndarray:
        """Representative coordinates, for bounding-box work."""
        if self.kind == "linseg":
            return np.array([self.p1, self.p2])
        r = self.radius
        c = self.center
        offsets = np.concatenate([np.eye(c.size) * r, np.eye(c.size) * -r])
        return np.vstack([c + off for off in offsets])


@dataclass
class Scene:
    """A flat bag of primitives in one coordinate system."""

    dim: int
    primitives: list[Primitive] = field(default_factory=list)
    id: str = ""


def _check_vector(value, length, where):
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise SceneFormatError(f"expected a {length}-vector", where)
    out = []
    for i, item in enumerate(value):
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise SceneFormatError("expected a number", f"{where}[{i}]")
        if not math.isfinite(item):
            raise SceneFormatError("coordinate is not finite", f"{where}[{i}]")
        out.append(float(item))
    return out


def _parse_primitive(obj, dim, where) -> Primitive:
    if not isinstance(obj, dict):
        raise SceneFormatError("expected an object", where)
    kind = obj.get("kind")
    if kind not in PRIMITIVE_KINDS:
        raise SceneFormatError(f"unknown primitive kind {kind!r}", f"{where}.kind")
    strength = obj.get("strength", 1.0)
    if isinstance(strength, bool) or not isinstance(strength, (int, float)):
        raise SceneFormatError("strength must be a number", f"{where}.strength")
    if not (0.0 <= strength <= 1.0):
        raise SceneFormatError("strength must lie in [0, 1]", f"{where}.strength")
    allowed = {"kind", "strength"}
    allowed |= {"p1", "p2"} if kind == "linseg" else {"center", "radius"}
    for key in obj:
        if key not in allowed:
            raise SceneFormatError(f"unknown key {key!r}", f"{where}.{key}")
    if kind == "linseg":
        if "p1" not in obj or "p2" not in obj:
            raise SceneFormatError("linseg needs p1 and p2", where)
        p1 = _check_vector(obj["p1"], dim, f"{where}.p1")
        p2 = _check_vector(obj["p2"], dim, f"{where}.p2")
        if p1 == p2:
            raise SceneFormatError("linseg endpoints coincide", where)
        return Primitive("linseg", p1=p1, p2=p2, strength=float(strength))
    if "center" not in obj or "radius" not in obj:
        raise SceneFormatError("circle needs center and radius", where)
    center = _check_vector(obj["center"], dim, f"{where}.center")
    radius = obj["radius"]
    if isinstance(radius, bool) or not isinstance(radius, (int, float)):
        raise SceneFormatError("radius must be a number", f"{where}.radius")
    if not math.isfinite(radius) or radius <= 0:
        raise SceneFormatError("radius must be positive and finite", f"{where}.radius")
    return Primitive("circle", center=center, radius=float(radius), strength=float(strength))


def parse_scene(data) -> Scene:
    """Parse a scene document (bytes, text, or an already-decoded dict)."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SceneFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SceneFormatError("scene document must be a JSON object")
    dim = data.get("dim")
    if dim not in (2, 3):
        raise SceneFormatError("dim must be 2 or 3", "dim")
    prims_raw = data.get("primitives", [])
    if not isinstance(prims_raw, list):
        raise SceneFormatError("expected a list", "primitives")
    scene_id = data.get("id", "")
    if not isinstance(scene_id, str):
        raise SceneFormatError("id must be a string", "id")
    prims = [
        _parse_primitive(obj, dim, f"primitives[{i}]") for i, obj in enumerate(prims_raw)
    ]
    return Scene(dim=int(dim), primitives=prims, id=scene_id)


def parse_scene_file(path: str) -> Scene:
    try:
        with open(path, "rb") as fh:
            return parse_scene(fh.read())
    except OSError as exc:
        raise SceneFormatError(f"cannot read {path}: {exc}") from exc


def _num(x: float):
    """Floats that are whole numbers print as ints; repr otherwise (exact)."""
    f = float(x)
    return int(f) if f.is_integer() and abs(f) < 1e15 else f


def scene_to_json(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        if p.kind == "linseg":
            obj = {"kind": "linseg", "p1": [_num(v) for v in p.p1], "p2": [_num(v) for v in p.p2]}
        else:
            obj = {"kind": "circle", "center": [_num(v) for v in p.center], "radius": _num(p.radius)}
        if p.strength != 1.0:
            obj["strength"] = _num(p.strength)
        prims.append(obj)
    out = {"dim": scene.dim, "primitives": prims}
    if scene.id:
        out["id"] = scene.id
    return out


def write_scene(scene: Scene) -> bytes:
    """Canonical byte serialization; parse(write(s)) reproduces s exactly.

    Python's float repr is the shortest decimal string that round-trips, so
    every finite coordinate survives a write/parse cycle bit for bit.
    """
    return (json.dumps(scene_to_json(scene), indent=2) + "\n").encode("utf-8")


def write_scene_file(scene: Scene, path: str):
    with open(path, "wb") as fh:
        fh.write(write_scene(scene))


# -- SVG rendering -------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _probability_color(p: float) -> str:
    """Red at the pruning floor through yellow to green at certainty."""
    hue = 120.0 * max(0.0, min(1.0, p))
    return f"hsl({hue:.0f}, 85%, 40%)"


def render_svg(scene: Scene, ig=None, width: float = 640.0) -> str:
    """Standalone SVG of a 2D scene, with recognition overlays when `ig` given.

    Primitives are stroked black with opacity tracking their strength.
    Verified group instances (nodes that own part links) appear as colored
    frame outlines labeled with their type. Element order is deterministic.
    """
    if scene.dim != 2:
        raise SceneFormatError("only 2D scenes render to SVG; project 3D scenes first")

    pts = [p for prim in scene.primitives for p in prim.points()]
    overlays = _overlay_nodes(ig) if ig is not None else []
    for node in overlays:
        pts.extend(node.frame.corners())
    if pts:
        arr = np.array(pts)
        lo = arr.min(axis=0)
        hi = arr.max(axis=0)
    else:
        lo = np.zeros(2)
        hi = np.ones(2)
    span = np.maximum(hi - lo, 1e-9)
    pad = 0.05 * float(span.max())
    lo = lo - pad
    hi = hi + pad
    span = hi - lo
    scale = width / span[0]
    height = span[1] * scale

    def to_px(p):
        x = (p[0] - lo[0]) * scale
        y = (hi[1] - p[1]) * scale
        return x, y

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>',
    ]
    stroke = max(1.0, 0.003 * width)
    for prim in scene.primitives:
        opacity = max(0.15, min(1.0, prim.strength))
        if prim.kind == "linseg":
            x1, y1 = to_px(prim.p1)
            x2, y2 = to_px(prim.p2)
            out.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                f'stroke="black" stroke-width="{_fmt(stroke)}" stroke-opacity="{_fmt(opacity)}"/>'
            )
        else:
            cx, cy = to_px(prim.center)
            out.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(prim.radius * scale)}" '
                f'fill="none" stroke="black" stroke-width="{_fmt(stroke)}" '
                f'stroke-opacity="{_fmt(opacity)}"/>'
            )
    font = max(10.0, 0.018 * width)
    for node in overlays:
        color = _probability_color(node.probability)
        o = node.frame.origin
        a1, a2 = node.frame.axes
        corners = [o + a1 + a2, o + a1 - a2, o - a1 - a2, o - a1 + a2]
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (to_px(c) for c in corners))
        out.append(
            f'<polygon points="{path}" fill="none" stroke="{color}" '
            f'stroke-width="{_fmt(stroke * 1.5)}" stroke-dasharray="6,3"/>'
        )
        top = min(to_px(c)[1] for c in corners)
        cx = sum(to_px(c)[0] for c in corners) / 4.0
        label = f"{node.model_type} {node.probability:.2f}"
        out.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(top - 0.3 * font)}" font-size="{_fmt(font)}" '
            f'font-family="sans-serif" text-anchor="middle" fill="{color}">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _overlay_nodes(ig):
    """Verified nodes that own part links, in deterministic order."""
    group_keys = set()
    for link in ig.links:
        if link.kind == "part-of":
            group_keys.add(link.target)
    nodes = [
        n
        for n in ig.nodes.values()
        if n.status == "verified" and (n.model_type, n.instance) in group_keys
    ]
    nodes.sort(key=lambda n: (n.model_type, n.instance))
    return nodes
