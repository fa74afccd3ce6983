"""End-to-end orchestration: synth -> split -> SGD train -> GA evolve -> compare.

Used by the CLI and by the acceptance harness; everything is derived from one
master seed.
"""

from dataclasses import dataclass

from .data import Dataset, SplitSpec, SynthConfig, generate_synthetic, split_by_patient
from .evo import EvoConfig, build_feature_cache, evolve, head_margins
from .metrics import auc
from .nn import build_model
from .report import MethodMetrics
from .rng import RngStream
from .train import TrainConfig, positive_scores, train

PROFILES = {
    # CPU desk-scale profile for CI and the acceptance run
    "quick": {"population": 128, "patients": 60, "epochs": 15},
    # published defaults (population 512, 50-epoch cap)
    "paper": {"population": 512, "patients": 60, "epochs": 50},
}


def make_splits(dataset: Dataset, seed: int, spec: SplitSpec | None = None):
    """Patient-grouped splits, reproducible from (dataset, seed)."""
    return split_by_patient(dataset, spec or SplitSpec(), RngStream(seed).child("split"))


def sgd_metrics(model, splits) -> MethodMetrics:
    aucs = []
    for part in splits:
        labels = [r.label for r in part]
        aucs.append(auc(positive_scores(model, part), labels))
    return MethodMetrics(*aucs)


def ga_metrics(model, head, splits) -> MethodMetrics:
    aucs = []
    for part in splits:
        cache = build_feature_cache(model, part)
        aucs.append(auc(head_margins(head, cache), cache.labels))
    return MethodMetrics(*aucs)


@dataclass
class PipelineResult:
    model: object
    head: object
    history: object
    stats: list
    sgd: MethodMetrics
    ga: MethodMetrics


def run_pipeline(master_seed: int, profile: str = "quick") -> PipelineResult:
    p = PROFILES[profile]
    dataset = generate_synthetic(SynthConfig(n_patients=p["patients"], master_seed=master_seed))
    splits = make_splits(dataset, master_seed)
    model0 = build_model(RngStream(master_seed).child("model_init"))
    best_model, history = train(
        model0, splits[0], splits[1],
        TrainConfig(max_epochs=p["epochs"], master_seed=master_seed),
    )
    best_head, stats = evolve(
        best_model, splits[0], splits[1],
        EvoConfig(population_size=p["population"], master_seed=master_seed),
    )
    return PipelineResult(
        model=best_model,
        head=best_head,
        history=history,
        stats=stats,
        sgd=sgd_metrics(best_model, splits),
        ga=ga_metrics(best_model, best_head, splits),
    )


def run_quick_comparison(seed: int):
    """(sgd, ga) MethodMetrics at the quick profile; picklable for process pools."""
    result = run_pipeline(seed, "quick")
    return result.sgd, result.ga
