import math

import numpy as np
import pytest

from mctsga.genetic import Evaluator, GaParams, evaluate_population
from mctsga.genome import Population, encode, init_population
from mctsga.mcts import (
    MctsParams,
    SearchNode,
    backpropagate,
    expand,
    rollout,
    run_mcts_ga,
    select_path,
    stream,
    tree_size,
    uct_score,
    visit_conservation_violations,
)
from mctsga.network import MlpSpec, init_model


def level_sum(b, h):
    return sum(b**d for d in range(h))


@pytest.fixture(scope="module")
def small(diabetes_split):
    spec = MlpSpec()
    train, test = diabetes_split
    return spec, train, test, encode(init_model(spec, 0))


def node_with(q, n, depth=0):
    pop = Population([encode(init_model(MlpSpec((2, 1)), 0))])
    return SearchNode(pop, q=q, n=n, depth=depth)


def test_tree_size():
    assert tree_size(10, 10) == 1_111_111_111
    assert tree_size(2, 1) == 1
    assert tree_size(3, 4) == 40 == 1 + 3 + 9 + 27
    for b in range(2, 7):
        for h in range(1, 9):
            assert tree_size(b, h) == level_sum(b, h)
    with pytest.raises(OverflowError):
        tree_size(10, 30)
    with pytest.raises(ValueError):
        tree_size(1, 3)


def test_uct_score_examples():
    params = MctsParams(exploration_c=2.0)
    parent = node_with(0.0, 10)
    assert uct_score(node_with(0.0, 0), parent, params) == math.inf
    child = node_with(2.1, 3)
    assert uct_score(child, parent, params) == pytest.approx(0.7 + math.sqrt(2 * math.log(10) / 4), abs=1e-12)
    assert uct_score(child, parent, params) == pytest.approx(1.77299, abs=1e-5)
    assert uct_score(child, node_with(0.0, 1), params) == pytest.approx(0.7, abs=1e-15)
    literal = MctsParams(exploration_c=2.0, uct_mode="literal_cumulative")
    assert uct_score(child, parent, literal) == pytest.approx(2.1 + math.sqrt(2 * math.log(10) / 4), abs=1e-12)


def test_select_path_rules():
    params = MctsParams()
    root = node_with(0.0, 0)
    assert select_path(root, params) == [root]

    root = node_with(1.0, 2)
    visited = node_with(0.9, 1, depth=1)
    fresh = node_with(0.0, 0, depth=1)
    root.children = [visited, fresh]
    assert select_path(root, params) == [root, fresh]


def test_select_path_shift_invariance():
    params = MctsParams()
    rng = np.random.default_rng(0)
    for _ in range(50):
        root = node_with(0.0, 40)
        ns = rng.integers(1, 10, size=4)
        means = rng.uniform(0, 0.5, size=4)
        root.children = [node_with(m * n, int(n), 1) for m, n in zip(means, ns)]
        before = select_path(root, params)[1]
        for c in root.children:
            c.q += 0.3 * c.n
        assert select_path(root, params)[1] is before


def test_select_path_depth_cap():
    params = MctsParams(tree_depth_max=1)
    root = node_with(1.0, 1)
    child = node_with(1.0, 1, depth=1)
    child.children = [node_with(0.0, 0, depth=2)]
    root.children = [child]
    assert select_path(root, params) == [root, child]


def test_expand(small):
    spec, train, _, seed = small
    ga = GaParams(population_size=10)
    pop = evaluate_population(init_population(seed, 10, 0.5, seed=1), spec, train)
    leaf = SearchNode(pop)
    with Evaluator(spec, train) as ev:
        kids = expand(leaf, ev, ga, MctsParams(branching_factor=5), np.random.default_rng(0))
    assert len(kids) == 5 and leaf.children == kids
    for k in kids:
        assert k.depth == 1 and k.parent is leaf and k.n == 0
        assert k.population.evaluated() and len(k.population) == 10
        assert all(g.same_structure(seed) for g in k.population.members)
    distinct = {tuple(k.population.matrix().ravel()) for k in kids}
    assert len(distinct) >= 2

    capped = SearchNode(pop, depth=3)
    with Evaluator(spec, train) as ev:
        assert expand(capped, ev, ga, MctsParams(tree_depth_max=3), np.random.default_rng(0)) == []


def test_rollout_null_perturbation(small):
    spec, train, _, seed = small
    pop = evaluate_population(init_population(seed, 6, 0.5, seed=2), spec, train)
    before = pop.best()
    node = SearchNode(pop)
    with Evaluator(spec, train) as ev:
        res = rollout(node, ev, MctsParams(rollout_generations=1, es_sigma=0.0), np.random.default_rng(0))
    assert res.reward == before.fitness
    assert not res.replaced and node.population.best() is before


def test_rollout_improves_and_replaces(small):
    spec, train, _, seed = small
    pop = evaluate_population(init_population(seed, 6, 0.5, seed=2), spec, train)
    start = pop.best().fitness
    node = SearchNode(pop)
    with Evaluator(spec, train) as ev:
        res = rollout(node, ev, MctsParams(rollout_generations=10, es_sigma=0.3), np.random.default_rng(1))
    assert res.reward >= start
    if res.replaced:
        assert node.population.best() is res.individual
        assert node.population.best().fitness == res.reward


def test_backpropagate():
    root = node_with(0.0, 0)
    backpropagate([root], 0.7)
    assert (root.q, root.n) == (0.7, 1)
    for _ in range(4):
        backpropagate([root], 0.0)
    assert (root.q, root.n) == (0.7, 5)
    with pytest.raises(ValueError):
        backpropagate([root], 1.5)


def test_stream_independence():
    a = stream(1, 3, 2).random(4)
    assert np.array_equal(a, stream(1, 3, 2).random(4))
    assert not np.array_equal(a, stream(1, 4, 2).random(4))
    assert not np.array_equal(a, stream(1, 3, 1).random(4))


def test_run_single_iteration(small):
    spec, train, test, seed = small
    res = run_mcts_ga(seed, spec, train, test, GaParams(population_size=8),
                      MctsParams(iteration_budget=1, branching_factor=3, rollout_generations=2))
    assert res.root.n == 1
    assert res.stats["iterations"] == 1
    assert len(res.root.children) == 3
    assert sum(c.n for c in res.root.children) == 1


def test_run_accounting_small_tree(small):
    spec, train, test, seed = small
    params = MctsParams(branching_factor=2, tree_depth_max=3, iteration_budget=20,
                        rollout_generations=2, seed=3)
    res = run_mcts_ga(seed, spec, train, test, GaParams(population_size=6), params)
    root = res.root
    assert root.n == res.stats["iterations"]
    assert visit_conservation_violations(root) == []
    nodes = list(root.iter_tree())
    assert len(nodes) == res.stats["nodes_created"]
    assert all(0.0 <= n.q / n.n <= 1.0 for n in nodes if n.n)
    assert all(n.depth <= 3 for n in nodes)
    assert len(nodes) <= tree_size(2, res.stats["max_depth_reached"] + 1)
    trace = res.stats["incumbent_trace"]
    assert all(b >= a for a, b in zip(trace, trace[1:]))
    assert res.best.fitness == trace[-1]


def test_run_stops_at_depth(small):
    spec, train, test, seed = small
    params = MctsParams(branching_factor=1, tree_depth_max=3, iteration_budget=50,
                        rollout_generations=1)
    res = run_mcts_ga(seed, spec, train, test, GaParams(population_size=4), params)
    assert res.stats["stop_reason"] == "depth"
    assert res.stats["max_depth_reached"] == 3


def test_run_deterministic(small):
    spec, train, test, seed = small
    params = dict(branching_factor=3, iteration_budget=12, rollout_generations=2, seed=9)

    def shape(node):
        return (node.n, round(node.q, 12), tuple(shape(c) for c in node.children))

    a = run_mcts_ga(seed, spec, train, test, GaParams(population_size=6), MctsParams(**params))
    b = run_mcts_ga(seed, spec, train, test, GaParams(population_size=6), MctsParams(**params),
                    workers=3)
    assert shape(a.root) == shape(b.root)
    assert a.best == b.best
    assert a.stats["incumbent_trace"] == b.stats["incumbent_trace"]
