"""The image graph: recognized structure built over one scene.

Nodes are typed instances (a particular rectangle, a particular truck) with a
frame, a probability, and a lifecycle status. Links carry conditional
probabilities between instances:

- ``part-of``: child supports a group instance (upward flow only).
- ``group-member``: a member node claimed by a group; carries the group's
  backward support and, when the member stands in directly for the slot,
  the upward contribution as well. Competing claims are resolved here.
- ``specializes``: a role or specialization node shadowing a more generic
  node (a side shadowing a segment, a truck1 shadowing a truck); probability
  passes down from the generic node.

Serialized form (sorted, reproducible):

{
  "scene": "<scene id>",
  "nodes": [{"type", "instance", "frame", "p", "status", "weight",
             "strength"?, "prim"?, "spec_slot"?}],
  "links": [{"kind", "from": [type, instance], "to": [type, instance],
             "conditional", "slot"?, "carries_up"?, "residuals"?}]
}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import SceneFormatError
from .geometry import Frame

NODE_STATUSES = ("hypothesized", "verified", "pruned")
LINK_KINDS = ("part-of", "group-member", "specializes")


@dataclass
class ImageNode:
    model_type: str
    instance: int
    frame: Frame
    probability: float = 0.0
    status: str = "hypothesized"
    template_weight: float = 1.0
    strength: float = 0.0
    prim_index: int | None = None
    spec_slot: str | None = None

    @property
    def key(self) -> tuple:
        return (self.model_type, self.instance)

    @property
    def is_primitive(self) -> bool:
        return self.prim_index is not None

    def label(self) -> str:
        return f"{self.model_type}#{self.instance}"


@dataclass
class ImageLink:
    kind: str
    source: tuple
    target: tuple
    conditional: float = 1.0
    slot: str | None = None
    carries_up: bool = True
    residuals: dict = field(default_factory=dict)


class ImageGraph:
    """Mutable recognition state for one scene."""

    def __init__(self, scene_id: str = "", model=None):
        self.scene_id = scene_id
        self.model = model
        self.nodes: dict[tuple, ImageNode] = {}
        self.links: list[ImageLink] = []
        self._counters: dict[str, int] = {}

    def add_node(self, model_type: str, frame: Frame, **kw) -> ImageNode:
        n = self._counters.get(model_type, 0) + 1
        self._counters[model_type] = n
        node = ImageNode(model_type, n, frame, **kw)
        self.nodes[node.key] = node
        return node

    def add_link(self, kind: str, source: tuple, target: tuple, **kw) -> ImageLink:
        if kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {kind!r}")
        link = ImageLink(kind, tuple(source), tuple(target), **kw)
        self.links.append(link)
        return link

    def node(self, key) -> ImageNode:
        return self.nodes[tuple(key)]

    def active_nodes(self) -> list[ImageNode]:
        return [n for n in self.nodes.values() if n.status != "pruned"]

    def verified_nodes(self) -> list[ImageNode]:
        return [n for n in self.nodes.values() if n.status == "verified"]

    def links_from(self, key, kind: str | None = None) -> list[ImageLink]:
        key = tuple(key)
        return [l for l in self.links if l.source == key and (kind is None or l.kind == kind)]

    def links_to(self, key, kind: str | None = None) -> list[ImageLink]:
        key = tuple(key)
        return [l for l in self.links if l.target == key and (kind is None or l.kind == kind)]

    def remove_links(self, doomed) -> list[ImageLink]:
        doomed = set(id(l) for l in doomed)
        removed = [l for l in self.links if id(l) in doomed]
        self.links = [l for l in self.links if id(l) not in doomed]
        return removed

    def sorted_nodes(self) -> list[ImageNode]:
        return sorted(self.nodes.values(), key=lambda n: n.key)

    def to_json(self) -> dict:
        nodes = []
        for n in self.sorted_nodes():
            obj = {
                "type": n.model_type,
                "instance": n.instance,
                "frame": n.frame.to_json(),
                "p": n.probability,
                "status": n.status,
                "weight": n.template_weight,
            }
            if n.strength:
                obj["strength"] = n.strength
            if n.prim_index is not None:
                obj["prim"] = n.prim_index
            if n.spec_slot is not None:
                obj["spec_slot"] = n.spec_slot
            nodes.append(obj)
        links = []
        for l in sorted(self.links, key=lambda l: (l.kind, l.source, l.target, l.slot or "")):
            obj = {
                "kind": l.kind,
                "from": list(l.source),
                "to": list(l.target),
                "conditional": l.conditional,
            }
            if l.slot is not None:
                obj["slot"] = l.slot
            if not l.carries_up:
                obj["carries_up"] = False
            if l.residuals:
                obj["residuals"] = {k: l.residuals[k] for k in sorted(l.residuals)}
            links.append(obj)
        return {"scene": self.scene_id, "nodes": nodes, "links": links}

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_json(), indent=2) + "\n").encode("utf-8")

    @staticmethod
    def from_json(obj: dict, model=None) -> "ImageGraph":
        ig = ImageGraph(obj.get("scene", ""), model=model)
        for raw in obj.get("nodes", []):
            try:
                node = ImageNode(
                    model_type=raw["type"],
                    instance=int(raw["instance"]),
                    frame=Frame.from_json(raw["frame"]),
                    probability=float(raw.get("p", 0.0)),
                    status=raw.get("status", "hypothesized"),
                    template_weight=float(raw.get("weight", 1.0)),
                    strength=float(raw.get("strength", 0.0)),
                    prim_index=raw.get("prim"),
                    spec_slot=raw.get("spec_slot"),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise SceneFormatError(f"bad image-graph node: {exc}") from exc
            if node.status not in NODE_STATUSES:
                raise SceneFormatError(f"unknown node status {node.status!r}")
            ig.nodes[node.key] = node
            ig._counters[node.model_type] = max(
                ig._counters.get(node.model_type, 0), node.instance
            )
        for raw in obj.get("links", []):
            try:
                link = ImageLink(
                    kind=raw["kind"],
                    source=tuple(raw["from"]),
                    target=tuple(raw["to"]),
                    conditional=float(raw.get("conditional", 1.0)),
                    slot=raw.get("slot"),
                    carries_up=bool(raw.get("carries_up", True)),
                    residuals=dict(raw.get("residuals", {})),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise SceneFormatError(f"bad image-graph link: {exc}") from exc
            if link.kind not in LINK_KINDS:
                raise SceneFormatError(f"unknown link kind {link.kind!r}")
            for key in (link.source, link.target):
                if tuple(key) not in ig.nodes:
                    raise SceneFormatError(f"link references missing node {key}")
            ig.links.append(link)
        return ig

    @staticmethod
    def from_bytes(blob: bytes, model=None) -> "ImageGraph":
        try:
            obj = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SceneFormatError(f"image graph is not valid JSON: {exc}") from exc
        return ImageGraph.from_json(obj, model=model)
