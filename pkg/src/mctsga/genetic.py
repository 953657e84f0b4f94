"""Genetic action (selection, crossover, mutation), fitness, and the GA baseline."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DataError, StructureError
from .genome import Genome, Population, decode, init_population
from .metrics import THRESHOLD, summarize
from .network import BCE_EPS, MlpSpec, forward

MUTATION_MODES = ("swap_between_individuals", "swap_within_individual")


@dataclass
class GaParams:
    population_size: int = 30
    tournament_k: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    generations: int = 200
    mutation_mode: str = "swap_between_individuals"
    elitism: int = 1
    seed: int = 0

    def validate(self):
        if self.population_size < 2:
            raise DataError("population_size must be >= 2")
        if not 2 <= self.tournament_k <= self.population_size:
            raise DataError("tournament_k must be in [2, population_size]")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {v}")
        if self.generations < 1:
            raise DataError("generations must be >= 1")
        if self.mutation_mode not in MUTATION_MODES:
            raise DataError(f"mutation_mode must be one of {MUTATION_MODES}")
        if not 0 <= self.elitism < self.population_size:
            raise DataError("elitism must be in [0, population_size)")


class Evaluator:
    """Scores genomes on a fixed training set with the batched kernel.

    Results are cached on the genomes. With ``workers > 1`` the members are
    split into contiguous chunks scored on a thread pool; each member's
    score depends only on its own parameters, so the result does not depend
    on the worker count.
    """

    def __init__(self, spec: MlpSpec, data, workers=1):
        self.spec = spec
        self.X = np.ascontiguousarray(data.features)
        self.y = data.labels.astype(np.float64)
        self.sizes = np.asarray(spec.layer_sizes, dtype=np.int64)
        self.workers = max(1, int(workers))
        self.n_evals = 0
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def probabilities(self, params):
        if self._pool is None or params.shape[0] < 2:
            return _kernels.forward_population(params, self.X, self.sizes)
        chunks = np.array_split(params, min(self.workers, params.shape[0]))
        parts = self._pool.map(lambda c: _kernels.forward_population(c, self.X, self.sizes), chunks)
        return np.concatenate(list(parts))

    def __call__(self, members):
        todo = [g for g in members if g.fitness is None]
        if not todo:
            return members
        probs = self.probabilities(np.stack([g.values for g in todo]))
        correct = (probs >= THRESHOLD) == (self.y >= 0.5)
        acc = correct.mean(axis=1)
        p = np.clip(probs, BCE_EPS, 1.0 - BCE_EPS)
        bce = -(self.y * np.log(p) + (1.0 - self.y) * np.log(1.0 - p)).mean(axis=1)
        for g, a, l in zip(todo, acc, bce):
            g.fitness = float(a)
            g.tiebreak = float(-l)
        self.n_evals += len(todo)
        return members


def evaluate_fitness(g: Genome, spec: MlpSpec, train) -> float:
    """Training accuracy of the decoded network (cached on ``g``)."""
    if g.fitness is None:
        Evaluator(spec, train)([g])
    return g.fitness


def evaluate_population(pop: Population, spec: MlpSpec, train, workers=1) -> Population:
    with Evaluator(spec, train, workers) as ev:
        ev(pop.members)
    return pop


def tournament_select(pop: Population, k, rng) -> Genome:
    """Best of ``k`` distinct members drawn uniformly (ties to the lowest index)."""
    if k > len(pop):
        raise DataError(f"tournament size {k} exceeds population {len(pop)}")
    picks = np.sort(rng.choice(len(pop), size=k, replace=False))
    for i in picks:
        if pop.members[i].fitness is None:
            raise ValueError(f"member {i} has not been evaluated")
    best = picks[0]
    for i in picks[1:]:
        if pop.members[i].key() > pop.members[best].key():
            best = i
    return pop.members[best]


def crossover_layerwise(a: Genome, b: Genome, rng):
    """One-point crossover inside every segment; cut points drawn per segment."""
    if not a.same_structure(b):
        raise StructureError("crossover parents differ in structure")
    c1 = a.values.copy()
    c2 = b.values.copy()
    off = a.offsets
    for s, n in enumerate(a.lengths):
        if n < 2:
            continue
        cut = off[s] + int(rng.integers(1, n))
        end = off[s + 1]
        c1[cut:end] = b.values[cut:end]
        c2[cut:end] = a.values[cut:end]
    return a.with_values(c1), b.with_values(c2)


def mutate(pop: Population, rate, mode, rng) -> Population:
    """Per segment, with probability ``rate``, swap one pair of values.

    ``swap_between_individuals`` exchanges one position between two distinct
    members; ``swap_within_individual`` exchanges two positions inside one
    member. Swaps only permute existing values.
    """
    if mode not in MUTATION_MODES:
        raise DataError(f"unknown mutation mode {mode!r}")
    members = list(pop.members)
    size = len(members)
    mat = pop.matrix()
    touched = set()
    off = members[0].offsets
    for s, n in enumerate(members[0].lengths):
        if rng.random() >= rate:
            continue
        if mode == "swap_between_individuals":
            if size < 2:
                raise StructureError("between-individual swap needs two members")
            i, j = rng.choice(size, size=2, replace=False)
            pos = off[s] + int(rng.integers(n))
            mat[i, pos], mat[j, pos] = mat[j, pos], mat[i, pos]
            touched.update((int(i), int(j)))
        else:
            i = int(rng.integers(size))
            if n < 2:
                continue
            p, q = off[s] + rng.choice(n, size=2, replace=False)
            mat[i, p], mat[i, q] = mat[i, q], mat[i, p]
            touched.add(i)
    for i in touched:
        members[i] = members[i].with_values(mat[i])
    return Population(members, pop.generation)


def next_generation(pop: Population, params: GaParams, rng) -> Population:
    """One generational step on an evaluated population; offspring unevaluated."""
    size = len(pop)
    elite = []
    if params.elitism:
        order = sorted(range(size), key=lambda i: (pop.members[i].key(), -i), reverse=True)
        elite = [pop.members[i] for i in order[:params.elitism]]
    n_children = size - len(elite)
    children = []
    while len(children) < n_children:
        a = tournament_select(pop, params.tournament_k, rng)
        b = tournament_select(pop, params.tournament_k, rng)
        if rng.random() < params.crossover_rate:
            a, b = crossover_layerwise(a, b, rng)
        children.extend((a, b))
    children = children[:n_children]
    if len(children) >= 2 or params.mutation_mode == "swap_within_individual":
        children = mutate(Population(children), params.mutation_rate,
                          params.mutation_mode, rng).members
    return Population(elite + children, pop.generation + 1)


@dataclass
class GaResult:
    best: Genome
    history: list
    test_metrics: dict
    roc: np.ndarray
    n_evals: int = 0
    extra: dict = field(default_factory=dict)


def holdout_report(g: Genome, spec: MlpSpec, test):
    scores = forward(decode(g, spec), test.features)
    return summarize(scores, test.labels)


def run_ga(seed_genome: Genome, spec: MlpSpec, train, test, params: GaParams,
           perturb_range=0.5, workers=1) -> GaResult:
    """Canonical generational GA with tournament selection and elitism.

    ``history`` rows are ``(generation, best_fitness, mean_fitness)``.
    """
    params.validate()
    init_ss, loop_ss = np.random.SeedSequence(params.seed).spawn(2)
    rng = np.random.default_rng(loop_ss)
    pop = init_population(seed_genome, params.population_size, perturb_range, seed=init_ss)
    best = None
    history = []
    with Evaluator(spec, train, workers) as ev:
        for gen in range(params.generations):
            ev(pop.members)
            top = pop.best()
            if best is None or top.key() > best.key():
                best = top
            history.append((gen, top.fitness, float(np.mean([g.fitness for g in pop.members]))))
            if gen + 1 < params.generations:
                pop = next_generation(pop, params, rng)
        n_evals = ev.n_evals
    metrics, roc = holdout_report(best, spec, test)
    return GaResult(best, history, metrics, roc, n_evals)


def write_history_csv(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["generation", "best_fitness", "mean_fitness"])
        for gen, best, mean in history:
            w.writerow([gen, repr(float(best)), repr(float(mean))])
