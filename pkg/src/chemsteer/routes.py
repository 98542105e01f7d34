"""Retrosynthetic routes: trees of reactions from a target down to starting materials."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Iterator

from .chem.canon import canonical_form
from .chem.molecule import ChemError, Molecule, MolSet
from .chem.smiles import parse_smiles, parse_smiles_set


class RouteError(ValueError):
    pass


class RouteSchemaError(RouteError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ReactionStep:
    reactants: MolSet
    product: Molecule
    step_id: str
    metadata: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if canonical_form(self.product) in self.reactants.keys:
            raise RouteError(f"step {self.step_id}: product is also a reactant")

    @property
    def product_key(self) -> str:
        return canonical_form(self.product)

    def reaction_smiles(self) -> str:
        return f"{self.reactants.canonical_key}>>{self.product_key}"


@dataclass
class MolNode:
    mol: Molecule
    in_stock: bool = False
    reaction: ReactionStep | None = None
    children: list["MolNode"] = field(default_factory=list)

    @property
    def key(self) -> str:
        return canonical_form(self.mol)

    @property
    def is_leaf(self) -> bool:
        return self.reaction is None


@dataclass
class Route:
    root: MolNode
    name: str = ""

    @property
    def target(self) -> Molecule:
        return self.root.mol

    def _walk(self) -> Iterator[tuple[MolNode, int]]:
        """Yield ``(node, reaction distance from the root)`` depth first."""
        stack = [(self.root, 0)]
        while stack:
            node, d = stack.pop()
            yield node, d
            for child in reversed(node.children):
                stack.append((child, d + 1))

    def step_distances(self) -> dict[str, int]:
        """Reaction steps from the root to each step, counting the step itself."""
        return {node.reaction.step_id: d + 1 for node, d in self._walk() if node.reaction is not None}

    @property
    def depth(self) -> int:
        """Length of the longest root-to-leaf chain of reactions."""
        return max(self.step_distances().values(), default=0)

    @property
    def steps(self) -> list[ReactionStep]:
        """Forward order: deepest steps first, so inputs precede consumers."""
        dist = self.step_distances()
        found = [node.reaction for node, _ in self._walk() if node.reaction is not None]
        order = {s.step_id: i for i, s in enumerate(found)}
        return sorted(found, key=lambda s: (-dist[s.step_id], order[s.step_id]))

    @property
    def leaves(self) -> list[MolNode]:
        return [node for node, _ in self._walk() if node.is_leaf]

    def in_stock(self, leaf: MolNode) -> bool:
        return leaf.in_stock

    def step(self, step_id: str) -> ReactionStep:
        for s in self.steps:
            if s.step_id == step_id:
                return s
        raise KeyError(step_id)


def depth_fraction(route: Route, step: ReactionStep | str) -> Fraction:
    """1 for the deepest (earliest) step, 1/D for the final step of a D-deep route."""
    step_id = step if isinstance(step, str) else step.step_id
    dist = route.step_distances()
    if step_id not in dist:
        raise KeyError(f"step {step_id!r} is not part of the route")
    return Fraction(dist[step_id], route.depth)


# --- JSON tree format ----------------------------------------------------------


def _parse_mol(smiles: Any, path: str) -> Molecule:
    if not isinstance(smiles, str) or not smiles:
        raise RouteSchemaError("'smiles' must be a non-empty string", path)
    try:
        return parse_smiles(smiles)
    except ChemError as exc:
        raise RouteSchemaError(f"bad SMILES {smiles!r}: {exc}", path) from None


def _split_reaction(text: str) -> tuple[str, str]:
    for sep in (">>", "≫"):
        if sep in text:
            left, right = text.split(sep, 1)
            return left.strip(), right.strip()
    raise RouteError(f"reaction {text!r} has no '>>' separator")


def parse_route_tree(doc: str | dict, name: str = "") -> Route:
    """Build a route from ``{smiles, type: "mol", in_stock, children: [reaction]}`` trees.

    A reaction node is ``{type: "reaction", children: [mol, ...]}`` and may
    carry ``smiles`` ("reactants>>product", checked against the tree) and an
    ``id``.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise RouteSchemaError(f"invalid JSON: {exc}") from None
    counter = [0]

    def mol_node(d: Any, path: str, ancestors: tuple[str, ...]) -> MolNode:
        if not isinstance(d, dict):
            raise RouteSchemaError("molecule node must be an object", path)
        if d.get("type", "mol") != "mol":
            raise RouteSchemaError(f"expected a 'mol' node, found {d.get('type')!r}", path)
        mol = _parse_mol(d.get("smiles"), path + ".smiles")
        key = canonical_form(mol)
        if key in ancestors:
            raise RouteSchemaError(f"cycle: {key} is its own precursor", path)
        kids = d.get("children", [])
        if not isinstance(kids, list):
            raise RouteSchemaError("'children' must be a list", path)
        if len(kids) > 1:
            raise RouteSchemaError("a molecule is made by at most one reaction", path)
        in_stock = d.get("in_stock", False)
        if not isinstance(in_stock, bool):
            raise RouteSchemaError("'in_stock' must be a boolean", path + ".in_stock")
        node = MolNode(mol, in_stock if not kids else False)
        if kids:
            rpath = f"{path}.children[0]"
            rxn = kids[0]
            if not isinstance(rxn, dict) or rxn.get("type") != "reaction":
                raise RouteSchemaError("child of a molecule must be a 'reaction' node", rpath)
            mols = rxn.get("children")
            if not isinstance(mols, list) or not mols:
                raise RouteSchemaError("reaction needs at least one reactant", rpath)
            node.children = [
                mol_node(c, f"{rpath}.children[{i}]", ancestors + (key,)) for i, c in enumerate(mols)
            ]
            reactants = MolSet.of(c.mol for c in node.children)
            if "smiles" in rxn:
                try:
                    left, right = _split_reaction(rxn["smiles"])
                    declared_r = parse_smiles_set(left)
                    declared_p = parse_smiles(right)
                except (ChemError, RouteError) as exc:
                    raise RouteSchemaError(f"bad reaction SMILES: {exc}", rpath + ".smiles") from None
                if canonical_form(declared_p) != key:
                    raise RouteSchemaError("reaction product does not match the parent molecule", rpath)
                if declared_r.keys != reactants.keys:
                    raise RouteSchemaError("reaction reactants do not match the child molecules", rpath)
            counter[0] += 1
            step_id = str(rxn.get("id") or f"r{counter[0]}")
            meta = rxn.get("metadata", {})
            try:
                node.reaction = ReactionStep(reactants, mol, step_id, dict(meta))
            except RouteError as exc:
                raise RouteSchemaError(str(exc), rpath) from None
        return node

    root = mol_node(doc, "$", ())
    route = Route(root, name)
    ids = [s.step_id for s in route.steps]
    if len(set(ids)) != len(ids):
        raise RouteSchemaError("duplicate reaction ids")
    return route


def emit(route: Route) -> dict:
    """The JSON tree for ``route`` (inverse of :func:`parse_route_tree`)."""

    def mol_doc(node: MolNode) -> dict:
        d: dict = {"smiles": node.key, "type": "mol"}
        if node.reaction is None:
            d["in_stock"] = node.in_stock
            d["children"] = []
        else:
            rxn = {
                "type": "reaction",
                "id": node.reaction.step_id,
                "smiles": node.reaction.reaction_smiles(),
                "children": [mol_doc(c) for c in node.children],
            }
            if node.reaction.metadata:
                rxn["metadata"] = node.reaction.metadata
            d["children"] = [rxn]
        return d

    return mol_doc(route.root)


def from_reaction_list(lines: Iterable[str], name: str = "") -> Route:
    """Assemble a route from ``reactants>>product`` lines; the last product is the target."""
    reactions = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        left, right = _split_reaction(line)
        try:
            reactants = parse_smiles_set(left)
            product = parse_smiles(right)
        except ChemError as exc:
            raise RouteError(f"line {lineno}: {exc}") from None
        reactions.append((reactants, product, lineno))
    if not reactions:
        raise RouteError("no reactions given")
    producer: dict[str, tuple] = {}
    for rec in reactions:
        key = canonical_form(rec[1])
        if key in producer:
            raise RouteError(f"line {rec[2]}: {key} is produced twice (also on line {producer[key][2]})")
        producer[key] = rec
    target_key = canonical_form(reactions[-1][1])
    consumed = {k for r, _, _ in reactions for k in r.keys}
    for key, rec in producer.items():
        if key != target_key and key not in consumed:
            raise RouteError(f"line {rec[2]}: product {key} is never used")
    used_lines: set[int] = set()

    def build(key: str, mol: Molecule, ancestors: tuple[str, ...]) -> MolNode:
        if key in ancestors:
            raise RouteError(f"cycle: {key} is its own precursor")
        rec = producer.get(key)
        if rec is None:
            return MolNode(mol, in_stock=True)
        reactants, product, lineno = rec
        used_lines.add(lineno)
        children = [build(k, m, ancestors + (key,)) for k, m in zip(reactants.keys, reactants.species)]
        step = ReactionStep(reactants, product, f"line{lineno}")
        return MolNode(product, False, step, children)

    root = build(target_key, reactions[-1][1], ())
    unused = sorted(r[2] for r in reactions if r[2] not in used_lines)
    if unused:
        raise RouteError(f"lines {unused} are not connected to the target")
    route = Route(root, name)
    # number steps in forward order for readability
    nodes = [node for node, _ in route._walk() if node.reaction is not None]
    dist = {id(n): d for n, d in route._walk()}
    nodes.sort(key=lambda n: -dist[id(n)])
    for i, node in enumerate(nodes, 1):
        s = node.reaction
        node.reaction = ReactionStep(s.reactants, s.product, f"r{i}", s.metadata)
    return route


def route_to_text(route: Route) -> str:
    steps = route.steps
    lines = [f"Target: {canonical_form(route.target)}", "Starting materials:"]
    seen: set[str] = set()
    leaves = {leaf.key: leaf for leaf in route.leaves}
    for s in steps:
        for k in s.reactants.keys:
            if k in leaves and k not in seen:
                seen.add(k)
                tag = " [commercial]" if leaves[k].in_stock else " [not in stock]"
                lines.append(f"  - {k}{tag}")
    lines.append("Steps:")
    for i, s in enumerate(steps, 1):
        lines.append(f"  {i}. {s.reactants.canonical_key} >> {s.product_key}")
    return "\n".join(lines) + "\n"


def load_route(path) -> Route:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    name = str(path)
    if str(path).endswith((".txt", ".rxn")):
        return from_reaction_list(text.splitlines(), name)
    return parse_route_tree(text, name)
