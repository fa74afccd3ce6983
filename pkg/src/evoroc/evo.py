"""Layer-granularity genetic algorithm over the fully connected classifier head.

The convolutional stack is frozen: its eval-mode outputs are cached once as an
N x 1024 matrix, so scoring an individual costs three small matrix products
instead of a full forward pass. Fitness is exact training-set AUC. Each
generation keeps the top half verbatim, fills one quarter with layer-boundary
crossover children and one quarter with layer-resample mutants, and the loop
runs while either the max training AUC or the max validation AUC still
improves.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SplitError
from .metrics import auc
from .nn import CnnModel, LinearLayerParams, conv_features, relu, uniform01_init
from .rng import RngStream

HEAD_SHAPES = (("fc1", 256, 1024), ("fc2", 64, 256), ("fc3", 2, 64))


@dataclass
class ClassifierHead:
    fc1: LinearLayerParams
    fc2: LinearLayerParams
    fc3: LinearLayerParams

    def layers(self):
        return (self.fc1, self.fc2, self.fc3)

    def copy(self):
        return ClassifierHead(self.fc1.copy(), self.fc2.copy(), self.fc3.copy())

    def parameters(self):
        out = {}
        for name in ("fc1", "fc2", "fc3"):
            layer = getattr(self, name)
            out[f"{name}.w"] = layer.weights
            out[f"{name}.b"] = layer.bias
        return out


@dataclass
class FeatureCache:
    features: np.ndarray  # (N, 1024) float32
    labels: np.ndarray  # (N,) int
    patient_ids: np.ndarray  # (N,) int


@dataclass
class EvoConfig:
    population_size: int = 512
    mutation_probability: float = 0.01
    max_generations: int = 50
    master_seed: int = 0

    def __post_init__(self):
        if self.population_size % 4 != 0 or self.population_size < 4:
            raise ValueError("population_size must be a positive multiple of 4")
        if not 0 <= self.mutation_probability <= 1:
            raise ValueError("mutation_probability must be in [0,1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")


@dataclass
class Population:
    members: list
    fitness: np.ndarray | None = None


@dataclass
class GenerationStats:
    generation: int
    max_train_auc: float
    mean_train_auc: float
    max_val_auc: float
    best_index: int


def write_stats_csv(stats, path):
    with open(path, "w") as f:
        f.write("generation,max_train_auc,mean_train_auc,max_val_auc,best_index\n")
        for s in stats:
            f.write(
                f"{s.generation},{s.max_train_auc:.6f},{s.mean_train_auc:.6f},"
                f"{s.max_val_auc:.6f},{s.best_index}\n"
            )


def extract_head(model: CnnModel) -> ClassifierHead:
    """Deep copy of the model's FC layers; later head edits never touch the model."""
    return ClassifierHead(model.fc1.copy(), model.fc2.copy(), model.fc3.copy())


def build_feature_cache(model: CnnModel, records) -> FeatureCache:
    """Frozen eval-mode convolutional features for every slice, in split order."""
    if not records:
        raise SplitError("cannot build a feature cache from an empty split")
    feats = np.stack([conv_features(model, r.pixels) for r in records])
    return FeatureCache(
        features=feats,
        labels=np.array([r.label for r in records], dtype=np.int64),
        patient_ids=np.array([r.patient_id for r in records], dtype=np.int64),
    )


def _head_logits(head: ClassifierHead, cache: FeatureCache):
    f = cache.features
    if f.ndim != 2 or f.shape[1] != head.fc1.weights.shape[1]:
        raise ShapeError(
            f"cache width {f.shape} does not match head input dim {head.fc1.weights.shape[1]}"
        )
    h = relu(f @ head.fc1.weights.T + head.fc1.bias)
    h = relu(h @ head.fc2.weights.T + head.fc2.bias)
    return (h @ head.fc3.weights.T + head.fc3.bias).astype(np.float64)


def head_scores(head: ClassifierHead, cache: FeatureCache):
    """Class-1 softmax probability for every cached feature row."""
    logits = _head_logits(head, cache)
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e[:, 1] / e.sum(axis=1)


def head_margins(head: ClassifierHead, cache: FeatureCache):
    """Class-1 logit margin per row: the same ranking as head_scores (softmax
    is strictly monotone in the margin) but immune to probability saturation,
    which would otherwise collapse large-logit heads into all-tied scores."""
    logits = _head_logits(head, cache)
    return logits[:, 1] - logits[:, 0]


def random_head(rng: RngStream) -> ClassifierHead:
    layers = {}
    for name, out_dim, in_dim in HEAD_SHAPES:
        r = rng.child(name)
        layers[name] = LinearLayerParams(
            uniform01_init((out_dim, in_dim), r.child("w")),
            uniform01_init((out_dim,), r.child("b")),
        )
    return ClassifierHead(**layers)


def init_population(seed_head: ClassifierHead, config: EvoConfig, rng: RngStream) -> Population:
    """Member 0 is the trained head; the rest are uniform-[0,1) random heads."""
    members = [seed_head.copy()]
    members += [random_head(rng.child("init", i)) for i in range(1, config.population_size)]
    return Population(members=members)


def _worker_count():
    n = int(os.environ.get("EVOROC_THREADS", "0"))
    if n == 0:
        n = min(4, os.cpu_count() or 1)
    return max(1, n)


def evaluate_scores(population: Population, cache: FeatureCache):
    """Per-member ranking scores (logit margins), reduced in member order so the
    result is independent of thread schedule."""
    workers = _worker_count()
    if workers == 1:
        return [head_margins(m, cache) for m in population.members]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda m: head_margins(m, cache), population.members))


def evaluate_fitness(population: Population, cache: FeatureCache):
    scores = evaluate_scores(population, cache)
    population.fitness = np.array([auc(s, cache.labels) for s in scores], dtype=np.float64)
    return population.fitness


def rank_select(population: Population):
    """Top half by fitness, stable on ties (lower original index first)."""
    if population.fitness is None:
        raise ValueError("population has no evaluated fitness")
    order = np.argsort(-population.fitness, kind="mergesort")
    half = len(population.members) // 2
    return [population.members[int(i)] for i in order[:half]]


def crossover_layers(parent_a: ClassifierHead, parent_b: ClassifierHead, cut: int) -> ClassifierHead:
    """Single-point layer-boundary crossover: layers 1..cut from A, the rest from B."""
    if cut not in (1, 2):
        raise ValueError(f"cut must be 1 or 2, got {cut}")
    a = parent_a.layers()
    b = parent_b.layers()
    taken = [a[i].copy() if i < cut else b[i].copy() for i in range(3)]
    return ClassifierHead(*taken)


def mutate_layers(head: ClassifierHead, p: float, rng: RngStream) -> ClassifierHead:
    """Per-layer Bernoulli(p): on a hit, resample the whole layer uniform [0,1)."""
    if not 0 <= p <= 1:
        raise ValueError(f"mutation probability must be in [0,1], got {p}")
    layers = []
    for i, (name, out_dim, in_dim) in enumerate(HEAD_SHAPES):
        r = rng.child("layer", i)
        if float(r.uniform()) < p:
            layers.append(
                LinearLayerParams(
                    uniform01_init((out_dim, in_dim), r.child("w")),
                    uniform01_init((out_dim,), r.child("b")),
                )
            )
        else:
            layers.append(head.layers()[i].copy())
    return ClassifierHead(*layers)


def next_generation(survivors, config: EvoConfig, rng: RngStream) -> Population:
    """survivors verbatim + size/4 crossover children + size/4 mutated copies."""
    half = config.population_size // 2
    quarter = config.population_size // 4
    if len(survivors) != half:
        raise ValueError(f"expected {half} survivors, got {len(survivors)}")
    members = list(survivors)
    for i in range(quarter):
        r = rng.child("cross", i)
        a, b = (int(x) for x in r.choice(half, size=2, replace=False))
        cut = 1 + int(r.integers(0, 2))
        members.append(crossover_layers(survivors[a], survivors[b], cut))
    for i in range(quarter):
        r = rng.child("mutate", i)
        src = int(r.integers(0, half))
        members.append(mutate_layers(survivors[src], config.mutation_probability, r))
    return Population(members=members)


def evolve(model: CnnModel, train_records, val_records, config: EvoConfig):
    """Run the GA; returns (best head overall, per-generation stats).

    The best head is the member with the highest validation AUC over all
    generations (ties: higher training AUC, then earlier generation/index).
    """
    train_cache = build_feature_cache(model, train_records)
    val_cache = build_feature_cache(model, val_records)
    root = RngStream(config.master_seed)

    population = init_population(extract_head(model), config, root.child("pop0"))
    stats = []
    best = None  # (val_auc, train_auc, -generation, -index) maximized
    best_head = None
    run_max_train = -np.inf
    run_max_val = -np.inf

    for gen in range(config.max_generations):
        train_fit = evaluate_fitness(population, train_cache)
        val_scores = evaluate_scores(population, val_cache)
        val_fit = np.array([auc(s, val_cache.labels) for s in val_scores])

        gen_best = int(np.lexsort((np.arange(len(val_fit)), -train_fit, -val_fit))[0])
        stats.append(
            GenerationStats(
                generation=gen,
                max_train_auc=float(train_fit.max()),
                mean_train_auc=float(train_fit.mean()),
                max_val_auc=float(val_fit.max()),
                best_index=gen_best,
            )
        )
        key = (float(val_fit[gen_best]), float(train_fit[gen_best]), -gen, -gen_best)
        if best is None or key > best:
            best = key
            best_head = population.members[gen_best].copy()

        improved = train_fit.max() > run_max_train or val_fit.max() > run_max_val
        run_max_train = max(run_max_train, float(train_fit.max()))
        run_max_val = max(run_max_val, float(val_fit.max()))
        if gen > 0 and not improved:
            break
        if gen + 1 < config.max_generations:
            survivors = rank_select(population)
            population = next_generation(survivors, config, root.child("repro", gen))
    return best_head, stats
