"""Shared test plumbing: the reference quick-profile run and acceptance recording."""

import pytest

_CRITERIA = []


@pytest.fixture(scope="session")
def quick_run():
    """Reference quick-profile dataset + SGD-trained model (seed 0), shared by
    the calibration example and the heavier acceptance criteria."""
    from evoroc.data import SplitSpec, SynthConfig, generate_synthetic, split_by_patient
    from evoroc.nn import build_model
    from evoroc.rng import RngStream
    from evoroc.train import TrainConfig, train

    seed = 0
    dataset = generate_synthetic(SynthConfig(n_patients=60, master_seed=seed))
    splits = split_by_patient(dataset, SplitSpec(), RngStream(seed).child("split"))
    model0 = build_model(RngStream(seed).child("model_init"))
    best, history = train(
        model0, splits[0], splits[1], TrainConfig(max_epochs=15, master_seed=seed)
    )
    return best, history, splits


def record_criterion(name, ok, detail=""):
    """Register one acceptance criterion outcome; printed in the run summary."""
    _CRITERIA.append((name, bool(ok), detail))
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _CRITERIA:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
        terminalreporter.write_line(line)
