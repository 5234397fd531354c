"""
Trees Module
Typed rooted trees reproducing the perturbative orders diagram by diagram.

A tree of order j has j inner vertices of arity p; leaves are typed noise
(xi), position data (f) or velocity data (g). Feynman rules:
    xi-leaf      -> S*xi
    f-leaf       -> C(t) f
    g-leaf       -> S(t) g
    inner vertex -> -S*(pointwise product of its p children)
A tree's weight is the product over inner vertices of p!/prod_a n_a!, where
n_a counts the children in each isomorphism class. Summing weight x value
over all trees of order j gives phi_j.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import pydot
from pydantic import BaseModel, ConfigDict, model_validator

from skg.solvers.duhamel import (
    SpaceTimeField,
    TimeGrid,
    homogeneous_solution,
    source_convolve,
)
from skg.spectral.kernels import DispersionTable
from skg.spectral.lattice import Field

logger = logging.getLogger(__name__)


# ==================== Domain Types ====================

class NodeKind(str, Enum):
    INNER = "inner"
    XI = "xi"
    F = "f"
    G = "g"


LEAF_CODES = {NodeKind.XI: "x", NodeKind.F: "f", NodeKind.G: "g"}
LEAF_KINDS = (NodeKind.XI, NodeKind.F, NodeKind.G)


class TreeNode(BaseModel):
    """A vertex and its ordered children"""
    model_config = ConfigDict(frozen=True)

    kind: NodeKind
    children: Tuple["TreeNode", ...] = ()

    @model_validator(mode="after")
    def _check_arity(self) -> "TreeNode":
        if self.kind == NodeKind.INNER and not self.children:
            raise ValueError("inner vertices need children")
        if self.kind != NodeKind.INNER and self.children:
            raise ValueError("leaves have no children")
        return self

    @classmethod
    def leaf(cls, kind: NodeKind) -> "TreeNode":
        return cls(kind=kind)

    @classmethod
    def inner(cls, children) -> "TreeNode":
        return cls(kind=NodeKind.INNER, children=tuple(children))

    @property
    def is_leaf(self) -> bool:
        return self.kind != NodeKind.INNER


TreeNode.model_rebuild()


class WeightedTree(BaseModel):
    """Canonical tree with its symmetry weight"""
    model_config = ConfigDict(frozen=True)

    tree: TreeNode
    weight: int

    @model_validator(mode="after")
    def _check_tree(self) -> "WeightedTree":
        if len(arities(self.tree)) > 1:
            raise ValueError(f"inner vertices have mixed arities {sorted(arities(self.tree))}")
        expected = symmetry_weight(self.tree)
        if self.weight != expected:
            raise ValueError(f"weight {self.weight} differs from the symmetry weight {expected}")
        return self

    @property
    def encoding(self) -> str:
        return encode(self.tree)

    @property
    def order(self) -> int:
        return inner_count(self.tree)

    @property
    def arity(self) -> Optional[int]:
        """Children per inner vertex, None for a bare leaf"""
        found = arities(self.tree)
        return next(iter(found)) if found else None


# ==================== Canonical Form ====================

@lru_cache(maxsize=None)
def encode(tree: TreeNode) -> str:
    """Canonical string: leaves x/f/g, inner vertices [child,child,...] with sorted children"""
    if tree.is_leaf:
        return LEAF_CODES[tree.kind]
    return "[" + ",".join(encode(c) for c in sorted(tree.children, key=sort_key)) + "]"


@lru_cache(maxsize=None)
def inner_count(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 0
    return 1 + sum(inner_count(c) for c in tree.children)


@lru_cache(maxsize=None)
def arities(tree: TreeNode) -> frozenset:
    """Child counts occurring at the inner vertices"""
    if tree.is_leaf:
        return frozenset()
    return frozenset([len(tree.children)]).union(*(arities(c) for c in tree.children))


def sort_key(tree: TreeNode) -> Tuple[int, str]:
    """Total order on trees: inner-vertex count first, then canonical encoding"""
    return inner_count(tree), encode(tree)


def canonical(tree: TreeNode) -> TreeNode:
    """Recursively sort children so isomorphic trees become identical"""
    if tree.is_leaf:
        return tree
    return TreeNode.inner(sorted((canonical(c) for c in tree.children), key=sort_key))


def local_factor(tree: TreeNode) -> int:
    """p! / prod_a n_a! for the children of one inner vertex"""
    classes = Counter(encode(c) for c in tree.children)
    factor = math.factorial(len(tree.children))
    for n in classes.values():
        factor //= math.factorial(n)
    return factor


@lru_cache(maxsize=None)
def symmetry_weight(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 1
    weight = local_factor(tree)
    for child in tree.children:
        weight *= symmetry_weight(child)
    return weight


def degree_multiplicity(tree: TreeNode) -> int:
    """
    Product of vertex degrees, counting the edge to the root marker

    Diagnostic only; the symmetry weight is the quantity that reproduces phi_j.
    """
    degree = len(tree.children) + 1
    for child in tree.children:
        degree *= degree_multiplicity(child)
    return degree


# ==================== Enumeration ====================

def _sorted_compositions(total: int, parts: int, minimum: int = 0) -> List[Tuple[int, ...]]:
    """Non-decreasing tuples of `parts` non-negative integers summing to total"""
    if parts == 1:
        return [(total,)] if total >= minimum else []
    out = []
    for head in range(minimum, total // parts + 1):
        for tail in _sorted_compositions(total - head, parts - 1, head):
            out.append((head,) + tail)
    return out


@lru_cache(maxsize=None)
def _trees(p: int, j: int) -> Tuple[WeightedTree, ...]:
    if j == 0:
        return tuple(WeightedTree(tree=TreeNode.leaf(k), weight=1) for k in sorted(
            LEAF_KINDS, key=lambda k: LEAF_CODES[k]))
    found: List[WeightedTree] = []
    for orders in _sorted_compositions(j - 1, p):
        groups = sorted(Counter(orders).items())
        choices = [
            list(itertools.combinations_with_replacement(_trees(p, order), count))
            for order, count in groups
        ]
        for picked in itertools.product(*choices):
            children = [wt for group in picked for wt in group]
            node = canonical(TreeNode.inner(wt.tree for wt in children))
            weight = local_factor(node)
            for wt in children:
                weight *= wt.weight
            found.append(WeightedTree(tree=node, weight=weight))
    found.sort(key=lambda wt: sort_key(wt.tree))
    return tuple(found)


def enumerate_trees(p: int, j: int) -> List[WeightedTree]:
    """
    All canonical typed trees with j inner vertices of arity p

    Args:
        p: vertex arity (nonlinearity exponent)
        j: number of inner vertices (series order); j = 0 gives the bare leaves

    Returns:
        Duplicate-free list in canonical order with symmetry weights
    """
    if p < 1 or j < 0:
        raise ValueError("enumerate_trees needs p >= 1 and j >= 0")
    return list(_trees(p, j))


def tree_counts(p: int, jmax: int) -> List[int]:
    return [len(_trees(p, j)) for j in range(jmax + 1)]


def weight_series(p: int, jmax: int) -> List[int]:
    """
    Coefficients of z^0..z^jmax in U = 3 + z U^p, exact integers

    The coefficient of z^j is the total weight of all trees of order j.
    """
    coeffs = [3] + [0] * jmax
    for _ in range(jmax):
        power = [1] + [0] * jmax
        for _ in range(p):
            power = [
                sum(power[a] * coeffs[n - a] for a in range(n + 1))
                for n in range(jmax + 1)
            ]
        coeffs = [3] + power[:jmax]
    return coeffs


# ==================== Evaluation ====================

class TreeEvaluator:
    """
    Applies the Feynman rules on a grid, memoising subtree values by encoding
    """

    def __init__(self, f: Field, g: Field, xi: Optional[SpaceTimeField],
                 table: DispersionTable, grid: TimeGrid, power: Optional[int] = None):
        self.table = table
        self.power = power
        self.grid = grid
        zero = Field.zeros(f.spec)
        xi_branch = (source_convolve(xi, table) if xi is not None
                     else SpaceTimeField.zeros(f.spec, grid))
        self.cache: Dict[str, SpaceTimeField] = {
            LEAF_CODES[NodeKind.XI]: xi_branch,
            LEAF_CODES[NodeKind.F]: homogeneous_solution(f, zero, table, grid),
            LEAF_CODES[NodeKind.G]: homogeneous_solution(zero, g, table, grid),
        }

    def value(self, tree: TreeNode) -> SpaceTimeField:
        """Unweighted analytic value, including the sign of every inner vertex"""
        key = encode(tree)
        if key not in self.cache:
            children = [self.value(c) for c in sorted(tree.children, key=sort_key)]
            product = children[0].values
            for child in children[1:]:
                product = product * child.values
            propagated = source_convolve(children[0].with_values(product), self.table)
            self.cache[key] = propagated.with_values(-propagated.values)
        return self.cache[key]

    def weighted(self, wt: WeightedTree) -> SpaceTimeField:
        if self.power is not None and wt.arity not in (None, self.power):
            raise ValueError(f"tree of arity {wt.arity} evaluated for power {self.power}")
        value = self.value(wt.tree)
        return value.with_values(wt.weight * value.values)


def evaluate_tree(wt: WeightedTree, f: Field, g: Field, xi: Optional[SpaceTimeField],
                  table: DispersionTable, grid: TimeGrid, power: Optional[int] = None) -> SpaceTimeField:
    """Weight x Feynman-rule value of one tree; `power` rejects trees of another arity"""
    return TreeEvaluator(f, g, xi, table, grid, power).weighted(wt)


def tree_sum(p: int, j: int, f: Field, g: Field, xi: Optional[SpaceTimeField],
             table: DispersionTable, grid: TimeGrid) -> SpaceTimeField:
    """Sum of weighted tree values of order j, reduced in canonical order"""
    evaluator = TreeEvaluator(f, g, xi, table, grid, p)
    total = np.zeros((grid.nodes, f.spec.size))
    trees = enumerate_trees(p, j)
    for wt in trees:
        total = total + evaluator.weighted(wt).values
    logger.debug("tree_sum p=%d j=%d over %d trees", p, j, len(trees))
    return SpaceTimeField(spec=f.spec, grid=grid, values=total)


# ==================== DOT Rendering ====================

LEAF_SHAPES = {NodeKind.XI: "diamond", NodeKind.F: "circle", NodeKind.G: "doublecircle"}


def render_dot(wt: WeightedTree) -> str:
    """
    DOT digraph of a weighted tree

    Root is a point labelled "x", inner vertices are filled circles, leaves are
    diamond (xi), circle (f) and doublecircle (g).
    """
    graph = pydot.Dot("tree", graph_type="digraph", label=f"weight={wt.weight}", rankdir="LR")
    graph.add_node(pydot.Node("root", shape="point", label="x", xlabel="x"))
    counter = itertools.count()

    def add(node: TreeNode, parent: str) -> None:
        name = f"n{next(counter)}"
        if node.is_leaf:
            graph.add_node(pydot.Node(name, shape=LEAF_SHAPES[node.kind], label=LEAF_CODES[node.kind]))
        else:
            graph.add_node(pydot.Node(name, shape="circle", style="filled", fillcolor="black",
                                      label=" ", width="0.15"))
        graph.add_edge(pydot.Edge(parent, name))
        for child in node.children:
            add(child, name)

    add(wt.tree, "root")
    return graph.to_string()
