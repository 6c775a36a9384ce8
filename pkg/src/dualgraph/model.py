"""Dual-hierarchy model graph: the offline knowledge base for recognition.

A model graph holds one node per object type.  Nodes are tied together along
two independent dimensions: the parts hierarchy (a rectangle is made of four
sides) and the abstraction hierarchy (a cab is a box, a truck1 is a truck).
Relation specs attached to a node constrain the geometry of its parts, and the
midx index maps pairs of abstract part types to the groups they may indicate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ModelFormatError, ModelValidationError
from .geometry import (
    RELATION_FUNCTIONS,
    SYMMETRY_CLASSES,
    Frame,
    canonicalize_frame,
)

BOOLEAN_RELATIONS = {"parallel", "touch", "inside"}
SCALAR_RELATIONS = ("size-ratio", "distance-ratio", "angle")

DEFAULT_ELASTICITY = (0.25, 0.25, 0.25)


@dataclass
class RelationSpec:
    """One geometric constraint between two named parts of a node."""

    function: str
    operands: tuple
    target: object
    tolerance: float

    def to_json(self) -> list:
        target = self.target
        if isinstance(target, np.ndarray):
            target = [float(v) for v in target]
        return [self.function, *self.operands, target, self.tolerance]

    @staticmethod
    def from_json(row, where: str) -> "RelationSpec":
        if not isinstance(row, list) or len(row) < 4:
            raise ModelFormatError(f"{where}: relation must be [fn, a, b, target, tol], got {row!r}")
        function = row[0]
        if function not in RELATION_FUNCTIONS:
            raise ModelFormatError(f"{where}: unknown relation function {function!r}")
        *operands, target, tol = row[1:]
        if len(operands) != 2:
            raise ModelFormatError(f"{where}: {function} takes 2 operands, got {len(operands)}")
        if function in BOOLEAN_RELATIONS:
            if not isinstance(target, bool):
                raise ModelFormatError(f"{where}: {function} target must be a boolean")
        elif function == "pose":
            target = np.asarray(target, dtype=float)
        elif isinstance(target, bool) or not isinstance(target, (int, float)):
            raise ModelFormatError(f"{where}: {function} target must be a number")
        if not isinstance(tol, (int, float)) or isinstance(tol, bool) or tol <= 0:
            raise ModelFormatError(f"{where}: tolerance must be a positive number")
        return RelationSpec(function, tuple(operands), target, float(tol))


@dataclass
class PartLink:
    """A slot of a group node: which part type fills it and where it sits.

    `name` identifies the slot in relation specs; `type_name` is the model
    node filling it (defaults to the name when the file omits "type").
    Variant-tagged slots are mutually exclusive alternatives.
    """

    name: str
    type_name: str
    frame: Frame
    essential: bool = True
    variant_tag: Optional[str] = None
    multiplicity: tuple = (1, 1)
    elasticity: tuple = DEFAULT_ELASTICITY

    def to_json(self) -> dict:
        out = {"name": self.name}
        if self.type_name != self.name:
            out["type"] = self.type_name
        if self.variant_tag is not None:
            out["variant"] = self.variant_tag
        out["essential"] = self.essential
        lo, hi = self.multiplicity
        out["multiplicity"] = lo if hi == lo else [lo, hi]
        out["frame"] = self.frame.to_json()
        out["elasticity"] = list(self.elasticity)
        return out

    @staticmethod
    def from_json(obj, where: str) -> "PartLink":
        if not isinstance(obj, dict) or "name" not in obj:
            raise ModelFormatError(f"{where}: part entry needs a name, got {obj!r}")
        name = obj["name"]
        type_name = obj.get("type", name)
        if "frame" not in obj:
            raise ModelFormatError(f"{where}: part {name!r} has no frame")
        frame = Frame.from_json(obj["frame"])
        mult = obj.get("multiplicity", 1)
        if mult == "many":
            multiplicity = (1, None)
        elif isinstance(mult, int):
            multiplicity = (mult, mult)
        elif isinstance(mult, list) and len(mult) == 2:
            multiplicity = (int(mult[0]), None if mult[1] is None else int(mult[1]))
        else:
            raise ModelFormatError(f"{where}: bad multiplicity {mult!r} on part {name!r}")
        elasticity = tuple(obj.get("elasticity", DEFAULT_ELASTICITY))
        if len(elasticity) != 3 or any(e <= 0 for e in elasticity):
            raise ModelFormatError(f"{where}: elasticity must be 3 positive numbers on {name!r}")
        return PartLink(
            name=name,
            type_name=type_name,
            frame=frame,
            essential=bool(obj.get("essential", True)),
            variant_tag=obj.get("variant"),
            multiplicity=multiplicity,
            elasticity=elasticity,
        )


@dataclass
class MidxEntry:
    """One hypothesis-index row: an abstract type pair suggesting a group."""

    key: tuple
    hypothesis: str
    slots: tuple
    screening: list


@dataclass
class ModelNode:
    type_name: str
    frame_template: Frame
    symmetry_class: str = "none"
    parts: list = field(default_factory=list)
    relations: list = field(default_factory=list)
    lower_loa: list = field(default_factory=list)
    higher_loa: list = field(default_factory=list)
    groups: list = field(default_factory=list)
    specialize_relations: dict = field(default_factory=dict)
    midx: list = field(default_factory=list)
    builtin: bool = False

    def part(self, slot_name: str) -> PartLink:
        for link in self.parts:
            if link.name == slot_name:
                return link
        raise KeyError(slot_name)

    def slot_names(self):
        return [link.name for link in self.parts]


@dataclass
class ModelGraph:
    nodes: dict
    root: str
    dim: int = 2

    def node(self, type_name: str) -> ModelNode:
        return self.nodes[type_name]

    def sorted_nodes(self):
        return [self.nodes[k] for k in sorted(self.nodes)]

    def abstract_types(self, type_name: str) -> frozenset:
        """Types the recognizer can hold bottom-up for this model type.

        Climbs higher-LoA links until reaching a node that has parts of its
        own or no more abstract parent; a multi-parent node contributes every
        branch.
        """
        result = set()
        stack = [type_name]
        seen = set()
        while stack:
            t = stack.pop()
            if t in seen:
                continue
            seen.add(t)
            node = self.nodes.get(t)
            if node is None:
                continue
            if node.parts or not node.higher_loa:
                result.add(t)
            else:
                stack.extend(node.higher_loa)
        return frozenset(result)

    def is_primitive(self, type_name: str) -> bool:
        node = self.nodes.get(type_name)
        return node is not None and node.builtin and not node.parts


def _complete_links(g: ModelGraph) -> None:
    """Fill in the reciprocal half of one-sided link declarations."""
    for node in g.nodes.values():
        for child in node.lower_loa:
            other = g.nodes.get(child)
            if other is not None and node.type_name not in other.higher_loa:
                other.higher_loa.append(node.type_name)
        for parent in node.higher_loa:
            other = g.nodes.get(parent)
            if other is not None and node.type_name not in other.lower_loa:
                other.lower_loa.append(node.type_name)
    for node in g.nodes.values():
        for link in node.parts:
            other = g.nodes.get(link.type_name)
            if other is not None and node.type_name not in other.groups:
                other.groups.append(node.type_name)
    for node in g.nodes.values():
        node.lower_loa = sorted(set(node.lower_loa))
        node.higher_loa = sorted(set(node.higher_loa))
        node.groups = sorted(set(node.groups))


def _hierarchy_cycles(g: ModelGraph, edges_of, label: str) -> list:
    """Detect cycles following `edges_of(node) -> iterable of type names`."""
    violations = []
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {name: WHITE for name in g.nodes}

    def visit(name, path):
        color[name] = GRAY
        for nxt in edges_of(g.nodes[name]):
            if nxt not in g.nodes:
                continue
            if color[nxt] == GRAY:
                cycle = path[path.index(nxt):] + [nxt] if nxt in path else [name, nxt]
                violations.append(f"{label} hierarchy cycle: {' -> '.join(cycle)}")
            elif color[nxt] == WHITE:
                visit(nxt, path + [nxt])
        color[name] = BLACK

    for name in sorted(g.nodes):
        if color[name] == WHITE:
            visit(name, [name])
    return violations


def validate(g: ModelGraph) -> list:
    """Check every structural invariant; returns a list of violation strings."""
    violations = []
    for name in sorted(g.nodes):
        node = g.nodes[name]
        if node.type_name != name:
            violations.append(f"node {name}: keyed under a different name than its type")
        if node.symmetry_class not in SYMMETRY_CLASSES:
            violations.append(f"node {name}: unknown symmetry class {node.symmetry_class!r}")
        else:
            try:
                canonicalize_frame(node.frame_template, node.symmetry_class)
            except Exception as exc:
                violations.append(f"node {name}: frame template invalid for its symmetry: {exc}")
        if node.frame_template.dim != g.dim:
            violations.append(f"node {name}: frame template is {node.frame_template.dim}-dimensional in a {g.dim}-dimensional graph")

        seen_slots = set()
        for link in node.parts:
            if link.name in seen_slots:
                violations.append(f"node {name}: duplicate part name {link.name!r}")
            seen_slots.add(link.name)
            if link.type_name not in g.nodes:
                violations.append(f"node {name}: part {link.name!r} references undefined type {link.type_name!r}")
            lo, hi = link.multiplicity
            if lo < 0 or (hi is not None and hi < lo):
                violations.append(f"node {name}: part {link.name!r} has bad multiplicity {link.multiplicity}")
            if link.essential and lo < 1:
                violations.append(f"node {name}: essential part {link.name!r} needs multiplicity lower bound >= 1")
            if link.frame.dim != g.dim:
                violations.append(f"node {name}: part {link.name!r} frame has wrong dimension")
        for ref_list, rel_name in ((node.lower_loa, "lower-LoA"), (node.higher_loa, "higher-LoA"), (node.groups, "group")):
            for ref in ref_list:
                if ref not in g.nodes:
                    violations.append(f"node {name}: {rel_name} reference {ref!r} is undefined")

        for spec in node.relations:
            for operand in spec.operands:
                if operand not in seen_slots:
                    violations.append(f"node {name}: relation {spec.function} names operand {operand!r} which is not a part of {name}")
        for child, specs in sorted(node.specialize_relations.items()):
            if child not in g.nodes:
                violations.append(f"node {name}: specialization child {child!r} is undefined")
            elif child not in node.lower_loa:
                violations.append(f"node {name}: specialization child {child!r} is not lower-LoA linked")
            for spec in specs:
                for operand in spec.operands:
                    if operand not in seen_slots:
                        violations.append(f"node {name}: screening for {child} names operand {operand!r} which is not a part of {name}")

        part_types = {link.type_name for link in node.parts}
        for other in sorted(part_types & set(node.lower_loa) | part_types & set(node.higher_loa)):
            violations.append(f"node {name}: {other!r} is both a part and an abstraction link of the same node")

    # link symmetry
    for name in sorted(g.nodes):
        node = g.nodes[name]
        for child in node.lower_loa:
            if child in g.nodes and name not in g.nodes[child].higher_loa:
                violations.append(f"LoA link asymmetry: {name} lists {child} as lower but not vice versa")
        for parent in node.higher_loa:
            if parent in g.nodes and name not in g.nodes[parent].lower_loa:
                violations.append(f"LoA link asymmetry: {name} lists {parent} as higher but not vice versa")
        for group in node.groups:
            if group in g.nodes and name not in {l.type_name for l in g.nodes[group].parts}:
                violations.append(f"parts link asymmetry: {name} lists group {group} which has no such part")
        for link in node.parts:
            if link.type_name in g.nodes and name not in g.nodes[link.type_name].groups:
                violations.append(f"parts link asymmetry: {name} part {link.name} not reflected in {link.type_name}.groups")

    violations += _hierarchy_cycles(g, lambda n: sorted({l.type_name for l in n.parts}), "parts")
    violations += _hierarchy_cycles(g, lambda n: n.lower_loa, "abstraction")
    return violations


def _node_from_json(obj, dim: int) -> ModelNode:
    if not isinstance(obj, dict) or "type" not in obj:
        raise ModelFormatError(f"node entry needs a type, got {obj!r}")
    name = obj["type"]
    where = f"node {name}"
    symmetry = obj.get("symmetry", "none")
    if "frame" in obj:
        frame = Frame.from_json(obj["frame"])
    else:
        frame = Frame(np.zeros(dim), np.eye(dim))
    parts = [PartLink.from_json(p, where) for p in obj.get("parts", [])]
    relations = [RelationSpec.from_json(r, where) for r in obj.get("relations", [])]
    specialize = {
        child: [RelationSpec.from_json(r, f"{where} specialize {child}") for r in rows]
        for child, rows in obj.get("specialize", {}).items()
    }
    return ModelNode(
        type_name=name,
        frame_template=frame,
        symmetry_class=symmetry,
        parts=parts,
        relations=relations,
        lower_loa=list(obj.get("lower_loa", [])),
        higher_loa=list(obj.get("higher_loa", [])),
        specialize_relations=specialize,
        builtin=bool(obj.get("builtin", False)),
    )


def load_model(data, path: Optional[str] = None) -> ModelGraph:
    """Parse a model-graph document (bytes, text, or parsed dict) and validate it."""
    if isinstance(data, (bytes, str)):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}", path=path) from exc
    else:
        doc = data
    if not isinstance(doc, dict) or "nodes" not in doc or "root" not in doc:
        raise ModelFormatError("model document needs top-level 'root' and 'nodes'", path=path)
    dim = int(doc.get("dim", 2))
    if dim not in (2, 3):
        raise ModelFormatError(f"model dim must be 2 or 3, got {dim}", path=path)
    nodes = {}
    for obj in doc["nodes"]:
        node = _node_from_json(obj, dim)
        if node.type_name in nodes:
            raise ModelFormatError(f"duplicate node type {node.type_name!r}", path=path)
        nodes[node.type_name] = node
    g = ModelGraph(nodes=nodes, root=doc["root"], dim=dim)
    _complete_links(g)
    violations = validate(g)
    if violations:
        raise ModelValidationError(violations)
    build_midx(g)
    return g


def load_model_file(path: str) -> ModelGraph:
    with open(path, "rb") as fh:
        return load_model(fh.read(), path=path)


def fixture_path(name: str) -> str:
    """Absolute path of one of the packaged example model files."""
    from importlib.resources import files

    return str(files("dualgraph").joinpath("fixtures", name))


def serialize_model(g: ModelGraph) -> str:
    """Emit the canonical one-sided document (parts + lower_loa only)."""
    nodes = []
    for node in g.sorted_nodes():
        obj = {"type": node.type_name, "symmetry": node.symmetry_class,
               "frame": node.frame_template.to_json()}
        if node.builtin:
            obj["builtin"] = True
        if node.parts:
            obj["parts"] = [p.to_json() for p in node.parts]
        if node.relations:
            obj["relations"] = [r.to_json() for r in node.relations]
        if node.lower_loa:
            obj["lower_loa"] = list(node.lower_loa)
        if node.specialize_relations:
            obj["specialize"] = {
                child: [r.to_json() for r in specs]
                for child, specs in sorted(node.specialize_relations.items())
            }
        nodes.append(obj)
    doc = {"root": g.root, "dim": g.dim, "nodes": nodes}
    return json.dumps(doc, indent=2, sort_keys=True)


def build_midx(g: ModelGraph) -> dict:
    """Index hypothesis groups by unordered pairs of abstract part types.

    A slot pair is indexed only when at least one relation spec mentions both
    slots, because those relations are what screens the hypothesis.
    """
    index = {}
    for node in g.sorted_nodes():
        node.midx = []
        if not node.parts:
            continue
        names = node.slot_names()
        for i, slot_a in enumerate(names):
            for slot_b in names[i + 1:]:
                screening = [
                    spec for spec in node.relations
                    if set(spec.operands) == {slot_a, slot_b}
                ]
                if not screening:
                    continue
                type_a = node.part(slot_a).type_name
                type_b = node.part(slot_b).type_name
                for abs_a in sorted(g.abstract_types(type_a)):
                    for abs_b in sorted(g.abstract_types(type_b)):
                        key = tuple(sorted((abs_a, abs_b)))
                        entry = MidxEntry(key=key, hypothesis=node.type_name,
                                          slots=(slot_a, slot_b), screening=screening)
                        node.midx.append(entry)
                        index.setdefault(key, []).append(entry)
    for key in index:
        index[key].sort(key=lambda e: (e.hypothesis, e.slots))
    return index


def midx_lookup(index: dict, type_a: str, type_b: str) -> list:
    return index.get(tuple(sorted((type_a, type_b))), [])


def export_dot(g: ModelGraph) -> str:
    """Render the graph in DOT form: solid parts links, dashed abstraction links."""
    lines = ["digraph model {", "  rankdir=BT;"]
    for node in g.sorted_nodes():
        lines.append(f'  "{node.type_name}" [shape=box];')
    for node in g.sorted_nodes():
        for link in node.parts:
            lines.append(f'  "{link.type_name}" -> "{node.type_name}" [style=solid, label="{link.name}"];')
        for child in node.lower_loa:
            lines.append(f'  "{child}" -> "{node.type_name}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- built-in shapes -----------------------------------------------------------

def _seg_frame(dim=3):
    axes = np.zeros((dim, dim))
    axes[0, 0] = 1.0
    return Frame(np.zeros(dim), axes)


def _planar_frame(origin, ax, ay):
    axes = np.zeros((3, 3))
    axes[0] = ax
    axes[1] = ay
    return Frame(origin, axes)


def builtin_library() -> ModelGraph:
    """The innate shape vocabulary: segments, circles, and their simple groups.

    Authored in 3 dimensions; planar shapes carry a zero third axis so they
    embed directly in spatial scenes.
    """
    nodes = {}

    nodes["linseg"] = ModelNode("linseg", _seg_frame(), "undirected-segment", builtin=True,
                                lower_loa=["side"])
    nodes["circle"] = ModelNode("circle", Frame(np.zeros(3), np.eye(3)), "circle", builtin=True)
    nodes["side"] = ModelNode("side", _seg_frame(), "undirected-segment", builtin=True)

    rect_parts = [
        PartLink("side1", "side", _planar_frame([0, -0.6, 0], [1, 0, 0], [0, 0, 0])),
        PartLink("side2", "side", _planar_frame([0, 0.6, 0], [1, 0, 0], [0, 0, 0])),
        PartLink("side3", "side", _planar_frame([-1, 0, 0], [0, 0.6, 0], [0, 0, 0])),
        PartLink("side4", "side", _planar_frame([1, 0, 0], [0, 0.6, 0], [0, 0, 0])),
    ]
    half_pi = float(np.pi / 2)
    rect_relations = [
        RelationSpec("parallel", ("side1", "side2"), True, 0.12),
        RelationSpec("parallel", ("side3", "side4"), True, 0.12),
        RelationSpec("size-ratio", ("side1", "side2"), 1.0, 0.15),
        RelationSpec("size-ratio", ("side3", "side4"), 1.0, 0.15),
        RelationSpec("angle", ("side1", "side3"), half_pi, 0.15),
        RelationSpec("touch", ("side1", "side3"), True, 0.12),
        RelationSpec("touch", ("side1", "side4"), True, 0.12),
        RelationSpec("touch", ("side2", "side3"), True, 0.12),
        RelationSpec("touch", ("side2", "side4"), True, 0.12),
    ]
    nodes["rectangle"] = ModelNode(
        "rectangle", _planar_frame([0, 0, 0], [1, 0, 0], [0, 0.6, 0]), "rectangle",
        parts=rect_parts, relations=rect_relations, builtin=True, lower_loa=["box-face"])

    nodes["box-face"] = ModelNode(
        "box-face", _planar_frame([0, 0, 0], [1, 0, 0], [0, 0.6, 0]), "rectangle", builtin=True)

    box_parts = [
        PartLink("face1", "box-face", _planar_frame([0, 0, -1], [1, 0, 0], [0, 1, 0])),
        PartLink("face2", "box-face", _planar_frame([0, 0, 1], [1, 0, 0], [0, 1, 0])),
        PartLink("face3", "box-face", _planar_frame([0, -1, 0], [1, 0, 0], [0, 0, 1])),
        PartLink("face4", "box-face", _planar_frame([0, 1, 0], [1, 0, 0], [0, 0, 1])),
        PartLink("face5", "box-face", _planar_frame([-1, 0, 0], [0, 1, 0], [0, 0, 1])),
        PartLink("face6", "box-face", _planar_frame([1, 0, 0], [0, 1, 0], [0, 0, 1])),
    ]
    box_relations = [
        RelationSpec("parallel", ("face1", "face2"), True, 0.15),
        RelationSpec("parallel", ("face3", "face4"), True, 0.15),
        RelationSpec("parallel", ("face5", "face6"), True, 0.15),
        RelationSpec("size-ratio", ("face1", "face2"), 1.0, 0.2),
        RelationSpec("size-ratio", ("face3", "face4"), 1.0, 0.2),
        RelationSpec("size-ratio", ("face5", "face6"), 1.0, 0.2),
        RelationSpec("touch", ("face1", "face3"), True, 0.12),
        RelationSpec("touch", ("face1", "face5"), True, 0.12),
        RelationSpec("touch", ("face3", "face5"), True, 0.12),
        RelationSpec("touch", ("face2", "face4"), True, 0.12),
        RelationSpec("touch", ("face2", "face6"), True, 0.12),
        RelationSpec("touch", ("face4", "face6"), True, 0.12),
    ]
    nodes["box"] = ModelNode("box", Frame(np.zeros(3), np.eye(3)), "box",
                             parts=box_parts, relations=box_relations, builtin=True)

    pair_parts = [
        PartLink("c_1", "circle", Frame([-0.5, 0, 0], np.eye(3) * 0.15)),
        PartLink("c_2", "circle", Frame([0.5, 0, 0], np.eye(3) * 0.15)),
    ]
    pair_relations = [
        RelationSpec("size-ratio", ("c_1", "c_2"), 1.0, 0.4),
        RelationSpec("distance-ratio", ("c_1", "c_2"), 5.0, 3.0),
    ]
    nodes["circle_pair"] = ModelNode(
        "circle_pair", _planar_frame([0, 0, 0], [0.65, 0, 0], [0, 0.15, 0]), "rectangle",
        parts=pair_parts, relations=pair_relations, builtin=True)

    g = ModelGraph(nodes=nodes, root="top", dim=3)
    _complete_links(g)
    violations = validate(g)
    if violations:
        raise ModelValidationError(violations)
    build_midx(g)
    return g
