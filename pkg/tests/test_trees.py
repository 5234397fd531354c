"""
Test Trees Module
Enumeration, canonical form, symmetry weights, Feynman-rule evaluation and
DOT rendering
"""

import math
import random

import numpy as np
import pydot
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from pydantic import ValidationError

from conftest import random_field
from skg.diagrams.trees import (
    NodeKind,
    TreeEvaluator,
    TreeNode,
    WeightedTree,
    canonical,
    degree_multiplicity,
    encode,
    enumerate_trees,
    evaluate_tree,
    local_factor,
    render_dot,
    symmetry_weight,
    tree_counts,
    tree_sum,
    weight_series,
)
from skg.simulation.simulator import NoiseRealization
from skg.solvers.duhamel import TimeGrid, source_convolve
from skg.solvers.perturbation import compute_orders
from skg.spectral.kernels import ModelParams, build_dispersion, kernel_position
from skg.spectral.lattice import Field, LatticeSpec, spatial_convolve

X = TreeNode.leaf(NodeKind.XI)
F = TreeNode.leaf(NodeKind.F)
G = TreeNode.leaf(NodeKind.G)


def lagrange_coefficient(p: int, j: int) -> int:
    """[z^j] U for U = 3 + z U^p, by Lagrange inversion"""
    if j == 0:
        return 3
    return math.comb(p * j, j - 1) * 3 ** (p * j - j + 1) // j


def shuffled(tree: TreeNode, rnd: random.Random) -> TreeNode:
    if tree.is_leaf:
        return tree
    children = [shuffled(c, rnd) for c in tree.children]
    rnd.shuffle(children)
    return TreeNode.inner(children)


# ==================== Enumeration ====================

def test_order_zero_is_the_three_leaves():
    trees = enumerate_trees(3, 0)
    assert [wt.encoding for wt in trees] == ["f", "g", "x"]
    assert all(wt.weight == 1 for wt in trees)


def test_order_one_weight_sum_is_27():
    trees = enumerate_trees(3, 1)
    assert len(trees) == 10
    assert sum(wt.weight for wt in trees) == 27


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_weight_sums_match_generating_function(p):
    series = weight_series(p, 4 if p < 4 else 3)
    for j, coefficient in enumerate(series):
        assert coefficient == lagrange_coefficient(p, j)
        assert sum(wt.weight for wt in enumerate_trees(p, j)) == coefficient


def test_weight_series_against_sympy():
    z = sp.symbols("z")
    u = sp.Integer(3)
    for _ in range(5):
        u = sp.expand(3 + z * u ** 3)
        u = sum(u.coeff(z, k) * z ** k for k in range(5))
    assert [int(u.coeff(z, k)) for k in range(5)] == weight_series(3, 4)


def test_tree_counts_grow():
    counts = tree_counts(3, 3)
    assert counts[:2] == [3, 10]
    assert all(b > a for a, b in zip(counts, counts[1:]))


@pytest.mark.parametrize("j", [1, 2, 3])
def test_enumeration_has_no_duplicates(j):
    encodings = [wt.encoding for wt in enumerate_trees(3, j)]
    assert len(encodings) == len(set(encodings))
    assert all(wt.order == j for wt in enumerate_trees(3, j))


def test_invalid_enumeration_arguments():
    with pytest.raises(ValueError):
        enumerate_trees(0, 1)
    with pytest.raises(ValueError):
        enumerate_trees(3, -1)


# ==================== Canonical Form / Weights ====================

def test_local_symmetry_factor():
    assert local_factor(TreeNode.inner([X, X, X])) == 1
    assert local_factor(TreeNode.inner([X, X, F])) == 3
    assert local_factor(TreeNode.inner([X, F, G])) == 6


def test_nested_weight():
    inner = TreeNode.inner([X, X, X])
    tree = TreeNode.inner([inner, X, X])
    assert symmetry_weight(tree) == 3
    assert encode(tree) == "[x,x,[x,x,x]]"


def test_canonical_sorts_by_size_then_encoding():
    tree = TreeNode.inner([TreeNode.inner([G, F, X]), X, F])
    assert encode(canonical(tree)) == "[f,x,[f,g,x]]"
    assert canonical(canonical(tree)) == canonical(tree)


@given(st.integers(0, 300), st.randoms(use_true_random=False))
def test_encoding_ignores_child_order(index, rnd):
    trees = enumerate_trees(3, 2)
    wt = trees[index % len(trees)]
    other = shuffled(wt.tree, rnd)
    assert encode(other) == wt.encoding
    assert canonical(other) == wt.tree
    assert symmetry_weight(other) == wt.weight


def test_degree_multiplicity():
    assert degree_multiplicity(X) == 1
    assert degree_multiplicity(TreeNode.inner([X, X, X])) == 4
    assert degree_multiplicity(TreeNode.inner([TreeNode.inner([X, X, X]), X, X])) == 16


def test_tree_node_arity_checks():
    with pytest.raises(ValueError):
        TreeNode(kind=NodeKind.INNER)
    with pytest.raises(ValueError):
        TreeNode(kind=NodeKind.XI, children=(X,))


# ==================== Evaluation ====================

@pytest.fixture
def inputs(line8, rng):
    params = ModelParams(gamma=1.0, mu2=1.0, lam=1.0, power=3, sigma=0.1)
    table = build_dispersion(line8, params)
    grid = TimeGrid.from_horizon(1.0, 0.05)
    f = random_field(line8, rng, 0.5)
    g = random_field(line8, rng, 0.5)
    noise = NoiseRealization(spec=line8, dt=grid.dt, sigma=params.sigma,
                             eta=rng.standard_normal((grid.steps, 8)))
    return f, g, noise.as_forcing(grid), params, table, grid


def test_all_noise_tree(inputs):
    f, g, xi, _, table, grid = inputs
    wt = WeightedTree(tree=TreeNode.inner([X, X, X]), weight=1)
    branch = source_convolve(xi, table)
    expected = -source_convolve(branch.with_values(branch.values ** 3), table).values
    np.testing.assert_allclose(evaluate_tree(wt, f, g, xi, table, grid).values, expected, atol=1e-14)


def test_evaluate_tree_rejects_other_power(inputs):
    f, g, xi, _, table, grid = inputs
    wt = WeightedTree(tree=TreeNode.inner([X, F]), weight=2)
    assert wt.arity == 2
    with pytest.raises(ValueError):
        evaluate_tree(wt, f, g, xi, table, grid, power=3)


def test_weighted_tree_checks_weight_and_arity():
    with pytest.raises(ValidationError):
        WeightedTree(tree=TreeNode.inner([X, X, F]), weight=1)
    with pytest.raises(ValidationError):
        WeightedTree(tree=TreeNode.inner([TreeNode.inner([X, X]), X, X]), weight=3)
    assert WeightedTree(tree=G, weight=1).arity is None


def test_nested_tree_against_direct_quadrature():
    spec = LatticeSpec(dim=1, sites_per_axis=4, spacing=1.0)
    params = ModelParams(gamma=1.0, mu2=1.0)
    table = build_dispersion(spec, params)
    grid = TimeGrid.from_horizon(0.5, 0.05)
    rng = np.random.Generator(np.random.Philox(5))
    xi = NoiseRealization(spec=spec, dt=grid.dt, sigma=1.0,
                          eta=rng.standard_normal((grid.steps, 4))).as_forcing(grid)

    def quadrature(values: np.ndarray) -> np.ndarray:
        out = np.zeros_like(values)
        for n in range(1, grid.nodes):
            for m in range(n):
                weight = 0.5 if m == 0 else 1.0
                kernel = kernel_position(table, (n - m) * grid.dt, "S")
                out[n] += weight * grid.dt * spatial_convolve(kernel, Field(spec=spec, values=values[m])).values
        return out

    leaf = quadrature(xi.values)
    inner = -quadrature(leaf ** 3)
    expected = -quadrature(inner * leaf * leaf)

    tree = canonical(TreeNode.inner([TreeNode.inner([X, X, X]), X, X]))
    evaluator = TreeEvaluator(Field.zeros(spec), Field.zeros(spec), xi, table, grid)
    np.testing.assert_allclose(evaluator.value(tree).values, expected, atol=1e-12)


def test_tree_sum_reproduces_orders(inputs):
    f, g, xi, params, table, grid = inputs
    orders = compute_orders(3, f, g, xi, params, table, grid)
    for order in orders:
        assert tree_sum(3, order.order, f, g, xi, table, grid).sup_distance(order.field) < 1e-9


def test_missing_noise_gives_zero_noise_leaves(inputs):
    f, g, _, _, table, grid = inputs
    evaluator = TreeEvaluator(f, g, None, table, grid)
    assert evaluator.value(X).sup_norm() == 0.0


# ==================== DOT ====================

def test_render_dot():
    wt = WeightedTree(tree=canonical(TreeNode.inner([X, X, F])), weight=3)
    dot = render_dot(wt)
    assert dot.count("->") == 4
    assert "weight=3" in dot
    graphs = pydot.graph_from_dot_data(dot)
    assert graphs and len(graphs[0].get_edges()) == 4


def dot_shapes(wt: WeightedTree):
    """Shape and style of every rendered node, by node name"""
    (graph,) = pydot.graph_from_dot_data(render_dot(wt))
    nodes = [n for n in graph.get_nodes() if n.get_name() not in ("node", "edge", "graph")]
    return {
        n.get_name(): ((n.get_shape() or "").strip('"'), (n.get_style() or "").strip('"'))
        for n in nodes
    }


def test_render_dot_single_leaf():
    shapes = dot_shapes(WeightedTree(tree=F, weight=1))
    assert sorted(shape for shape, _ in shapes.values()) == ["circle", "point"]


def test_render_dot_all_noise_tree():
    tree = TreeNode.inner([X, X, X])
    shapes = dot_shapes(WeightedTree(tree=tree, weight=symmetry_weight(tree)))
    assert len(shapes) == 5
    assert [shape for shape, _ in shapes.values()].count("diamond") == 3
    assert [style for _, style in shapes.values()].count("filled") == 1
    assert shapes["root"][0] == "point"


def test_render_dot_nested_noise_tree():
    tree = canonical(TreeNode.inner([X, X, TreeNode.inner([X, X, X])]))
    wt = WeightedTree(tree=tree, weight=symmetry_weight(tree))
    shapes = dot_shapes(wt)
    assert len(shapes) == 8
    assert [shape for shape, _ in shapes.values()].count("diamond") == 5
    assert [style for _, style in shapes.values()].count("filled") == 2
    assert f"weight={wt.weight}" in render_dot(wt)
    assert wt.weight == 3
