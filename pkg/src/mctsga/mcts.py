"""Monte Carlo tree search over GA populations.

Each tree node holds a whole population. Expanding a node applies one
stochastic GA generation per child (the genetic action); the simulation
step is an evolutionary rollout: the node's best individual is evolved
with a (mu + lambda) evolution strategy and replaced if it improved.
Rewards are training accuracies in [0, 1].
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import DataError
from .genetic import Evaluator, GaParams, holdout_report, next_generation
from .genome import Genome, Population, init_population

UCT_MODES = ("mean_exploit", "literal_cumulative")

# rng stream purposes; a stream is keyed by (node id, purpose, counter)
INIT, EXPAND, PICK, ROLLOUT = range(4)

INT64_MAX = 2**63 - 1


def stream(seed, node_id, purpose, counter=0):
    """Independent generator for one task, so parallel and serial runs agree."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(node_id), int(purpose), int(counter)))
    return np.random.default_rng(ss)


@dataclass
class MctsParams:
    tree_depth_max: int = 20
    branching_factor: int = 5
    rollout_generations: int = 10
    exploration_c: float = 2.0
    uct_mode: str = "mean_exploit"
    es_mu: int = 5
    es_lambda: int = 10
    es_sigma: float = 0.1
    iteration_budget: int = 200
    # False keeps searching after the depth cap is hit (it still caps expansion)
    stop_on_depth: bool = True
    seed: int = 0

    def validate(self):
        for name in ("tree_depth_max", "branching_factor", "rollout_generations",
                     "es_mu", "es_lambda", "iteration_budget"):
            if getattr(self, name) < 1:
                raise DataError(f"{name} must be >= 1")
        if self.exploration_c <= 0:
            raise DataError("exploration_c must be positive")
        if self.uct_mode not in UCT_MODES:
            raise DataError(f"uct_mode must be one of {UCT_MODES}")
        if self.es_sigma < 0:
            raise DataError("es_sigma must be non-negative")


@dataclass(eq=False)
class SearchNode:
    population: Population
    q: float = 0.0
    n: int = 0
    depth: int = 0
    children: list = field(default_factory=list)
    parent: Optional["SearchNode"] = field(default=None, repr=False)
    node_id: int = 0
    rollouts: int = 0

    def add_child(self, population, node_id):
        child = SearchNode(population, depth=self.depth + 1, parent=self, node_id=node_id)
        self.children.append(child)
        return child

    def iter_tree(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


def tree_size(b, h):
    """Node count of a complete tree with branching ``b`` and height ``h`` levels."""
    if b < 2 or h < 1:
        raise ValueError("need b >= 2 and h >= 1")
    size = (b**h - 1) // (b - 1)
    if size > INT64_MAX:
        raise OverflowError(f"tree_size({b}, {h}) exceeds 64-bit range")
    return size


def uct_score(child: SearchNode, parent: SearchNode, params: MctsParams):
    """Exploitation plus sqrt(c * ln(parent visits) / (child visits + 1))."""
    if child.n == 0:
        return math.inf
    explore = math.sqrt(params.exploration_c * math.log(parent.n) / (child.n + 1))
    if params.uct_mode == "literal_cumulative":
        return child.q + explore
    return child.q / child.n + explore


def select_path(root: SearchNode, params: MctsParams):
    path = [root]
    node = root
    while node.children and node.depth < params.tree_depth_max:
        scores = [uct_score(c, node, params) for c in node.children]
        node = node.children[int(np.argmax(scores))]
        path.append(node)
    return path


def expand(leaf: SearchNode, evaluator: Evaluator, ga: GaParams, params: MctsParams, rng,
           ids=None):
    """Attach ``branching_factor`` children, one GA generation each, evaluated."""
    if leaf.depth >= params.tree_depth_max:
        return []
    ids = ids if ids is not None else itertools.count(leaf.node_id * params.branching_factor + 1)
    new = []
    for child_rng in rng.spawn(params.branching_factor):
        pop = next_generation(leaf.population, ga, child_rng)
        evaluator(pop.members)
        new.append(leaf.add_child(pop, next(ids)))
    return new


class Rollout(NamedTuple):
    reward: float
    individual: Genome
    replaced: bool


def rollout(node: SearchNode, evaluator: Evaluator, params: MctsParams, rng) -> Rollout:
    """Age the node's best individual with a (mu + lambda)-ES.

    The reward is the best fitness seen during the run; plus-selection keeps
    the starting individual, so the reward never drops below it. If the aged
    individual is strictly fitter it replaces the original in the node.
    """
    pop = node.population
    idx = pop.best_index()
    start = pop.members[idx]
    mu, lam = params.es_mu, params.es_lambda
    parents = [start] * mu
    best = start
    for _ in range(params.rollout_generations):
        picks = rng.integers(mu, size=lam)
        noise = rng.normal(0.0, params.es_sigma, size=(lam, start.values.size))
        offspring = [parents[p].with_values(parents[p].values + noise[i])
                     for i, p in enumerate(picks)]
        evaluator(offspring)
        pool = parents + offspring
        # stable ranking: on equal keys the incumbent parents win
        order = sorted(range(len(pool)), key=lambda i: (pool[i].key(), -i), reverse=True)
        parents = [pool[i] for i in order[:mu]]
        if parents[0].key() > best.key():
            best = parents[0]
    replaced = best.fitness > start.fitness
    if replaced:
        pop.members[idx] = best
    return Rollout(best.fitness, best, replaced)


def backpropagate(path, reward):
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward {reward} outside [0, 1]")
    for node in path:
        node.n += 1
        node.q += reward


@dataclass
class MctsResult:
    best: Genome
    root: SearchNode
    stats: dict
    test_metrics: dict
    roc: np.ndarray


def run_mcts_ga(seed_genome: Genome, spec, train, test, ga: GaParams, params: MctsParams,
                perturb_range=0.5, workers=1) -> MctsResult:
    """Search until a node is created at ``tree_depth_max`` or the budget runs out.

    Returns the incumbent: the best genome evaluated anywhere in the run,
    ranked by training fitness with the BCE tie-break.
    """
    ga.validate()
    params.validate()
    t0 = time.perf_counter()
    seed = params.seed
    ids = itertools.count(1)
    with Evaluator(spec, train, workers) as ev:
        init_seed = stream(seed, 0, INIT).integers(2**63)
        pop = init_population(seed_genome, ga.population_size, perturb_range, seed=int(init_seed))
        ev(pop.members)
        root = SearchNode(pop, node_id=0)
        incumbent = pop.best()
        trace = [incumbent.fitness]
        n_nodes = 1
        max_depth = 0
        iterations = 0
        stop_reason = "budget"
        for _ in range(params.iteration_budget):
            path = select_path(root, params)
            leaf = path[-1]
            if leaf.depth < params.tree_depth_max and (leaf.n > 0 or leaf is root):
                children = expand(leaf, ev, ga, params, stream(seed, leaf.node_id, EXPAND), ids)
                n_nodes += len(children)
                for c in children:
                    top = c.population.best()
                    if top.key() > incumbent.key():
                        incumbent = top
                pick = stream(seed, leaf.node_id, PICK).integers(len(children))
                leaf = children[int(pick)]
                path.append(leaf)
                max_depth = max(max_depth, leaf.depth)
            result = rollout(leaf, ev, params, stream(seed, leaf.node_id, ROLLOUT, leaf.rollouts))
            leaf.rollouts += 1
            if result.individual.key() > incumbent.key():
                incumbent = result.individual
            backpropagate(path, result.reward)
            iterations += 1
            trace.append(incumbent.fitness)
            if params.stop_on_depth and max_depth >= params.tree_depth_max:
                stop_reason = "depth"
                break
        n_evals = ev.n_evals
    metrics, roc = holdout_report(incumbent, spec, test)
    stats = {
        "iterations": iterations,
        "nodes_created": n_nodes,
        "max_depth_reached": max_depth,
        "stop_reason": stop_reason,
        "fitness_evaluations": n_evals,
        "incumbent_fitness": incumbent.fitness,
        "incumbent_trace": trace,
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    return MctsResult(incumbent, root, stats, metrics, roc)


def visit_conservation_violations(root: SearchNode):
    """Nodes whose visit count differs from children visits plus own rollouts."""
    return [node for node in root.iter_tree()
            if node.n != sum(c.n for c in node.children) + node.rollouts]
