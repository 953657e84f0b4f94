"""Labelled per-layer parameter vectors: the individual that GA and MCTS evolve.

Layout of one segment: the layer's weight matrix flattened row-major
(out x in), followed by its bias vector. Segments are labelled ``L0``,
``L1``, ... in layer order. A genome stores all segments back to back in
one flat read-only array, which is what the fitness kernel consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError
from .network import MlpModel, MlpSpec


@dataclass(eq=False)
class Genome:
    labels: tuple
    lengths: tuple
    values: np.ndarray
    fitness: float | None = None
    # negative mean BCE on the training set; secondary key for ranking
    tiebreak: float | None = field(default=None, repr=False)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        self.lengths = tuple(int(n) for n in self.lengths)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size != sum(self.lengths):
            raise StructureError("values do not match segment lengths")
        if len(self.labels) != len(self.lengths):
            raise StructureError("one label per segment required")
        if not np.all(np.isfinite(values)):
            raise StructureError("genome values must be finite")
        values.setflags(write=False)
        self.values = values

    @property
    def offsets(self):
        return np.concatenate(([0], np.cumsum(self.lengths))).astype(int)

    @property
    def segments(self):
        """List of ``(label, values)`` with read-only views into ``values``."""
        off = self.offsets
        return [(lab, self.values[off[i]:off[i + 1]]) for i, lab in enumerate(self.labels)]

    def segment(self, label):
        for lab, vals in self.segments:
            if lab == label:
                return vals
        raise KeyError(label)

    def same_structure(self, other):
        return self.labels == other.labels and self.lengths == other.lengths

    def with_values(self, values):
        """New unevaluated genome with this structure."""
        return Genome(self.labels, self.lengths, values)

    def key(self):
        """Ranking key: fitness first, then the BCE tie-break."""
        if self.fitness is None:
            raise ValueError("genome has not been evaluated")
        tb = self.tiebreak if self.tiebreak is not None else -np.inf
        return (self.fitness, tb)

    def __eq__(self, other):
        if not isinstance(other, Genome):
            return NotImplemented
        return self.same_structure(other) and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass
class Population:
    members: list
    generation: int = 0

    def __post_init__(self):
        if not self.members:
            raise StructureError("population must be non-empty")
        first = self.members[0]
        for g in self.members[1:]:
            if not g.same_structure(first):
                raise StructureError("population members differ in structure")

    def __len__(self):
        return len(self.members)

    def matrix(self):
        return np.stack([g.values for g in self.members])

    def evaluated(self):
        return all(g.fitness is not None for g in self.members)

    def best_index(self):
        """Index of the top-ranked member (ties go to the lowest index)."""
        keys = [g.key() for g in self.members]
        return max(range(len(keys)), key=lambda i: (keys[i], -i))

    def best(self):
        return self.members[self.best_index()]


def encode(model: MlpModel) -> Genome:
    parts, lengths = [], []
    for W, b in zip(model.weights, model.biases):
        parts.append(W.ravel())
        parts.append(b)
        lengths.append(W.size + b.size)
    labels = tuple(f"L{i}" for i in range(len(lengths)))
    return Genome(labels, lengths, np.concatenate(parts))


def decode(g: Genome, spec: MlpSpec) -> MlpModel:
    expected = spec.segment_lengths
    if len(g.lengths) != len(expected):
        raise StructureError(f"genome has {len(g.lengths)} segments, spec needs {len(expected)}")
    weights, biases = [], []
    for (label, vals), n, (fout, fin) in zip(g.segments, expected, spec.shapes):
        if vals.size != n:
            raise StructureError(f"segment {label}: length {vals.size}, spec needs {n}")
        weights.append(vals[:fout * fin].reshape(fout, fin).copy())
        biases.append(vals[fout * fin:].copy())
    return MlpModel(spec, weights, biases)


def init_population(seed_genome: Genome, size, perturb_range=0.5, seed=0) -> Population:
    """``size`` copies of the seed genome, each plus U(-r, r) noise per value."""
    if size < 2:
        raise StructureError("population size must be >= 2")
    if perturb_range <= 0:
        raise ValueError("perturb_range must be positive")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-perturb_range, perturb_range, size=(size, seed_genome.values.size))
    members = [seed_genome.with_values(seed_genome.values + row) for row in noise]
    return Population(members, generation=0)


def genome_to_dict(g: Genome, spec: MlpSpec):
    d = {
        "format": "mctsga-genome/1",
        "layer_sizes": list(spec.layer_sizes),
        "activation": "sigmoid",
        "segments": [{"label": lab, "values": vals.tolist()} for lab, vals in g.segments],
    }
    if g.fitness is not None:
        d["fitness"] = g.fitness
    return d


def genome_from_dict(d) -> Genome:
    segs = d["segments"]
    values = np.concatenate([np.asarray(s["values"], dtype=np.float64) for s in segs])
    return Genome([s["label"] for s in segs], [len(s["values"]) for s in segs], values,
                  fitness=d.get("fitness"))


def save_genome(g: Genome, spec: MlpSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(genome_to_dict(g, spec), fh, indent=1)


def load_genome(path) -> Genome:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "segments" not in d:
        from .network import model_from_dict
        return encode(model_from_dict(d))
    return genome_from_dict(d)
