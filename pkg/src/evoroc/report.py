"""Two-method AUC comparison report (train/validation/test rows, SGD vs GA)."""

from dataclasses import dataclass


@dataclass
class MethodMetrics:
    train_auc: float
    val_auc: float
    test_auc: float


def relative_improvement(sgd_test: float, ga_test: float) -> float:
    """Relative test-AUC improvement of GA over SGD, in percent."""
    return (ga_test - sgd_test) / sgd_test * 100.0


def write_report(sgd: MethodMetrics, ga: MethodMetrics, path_base):
    """Write <base>.csv (machine) and <base>.txt (human table + improvement line)."""
    for m in (sgd, ga):
        if any(v is None for v in (m.train_auc, m.val_auc, m.test_auc)):
            raise ValueError("all six AUC values are required")
    improvement = relative_improvement(sgd.test_auc, ga.test_auc)

    csv_path = f"{path_base}.csv"
    with open(csv_path, "w") as f:
        f.write("metric,sgd,ga\n")
        f.write(f"train_auc,{sgd.train_auc:.6f},{ga.train_auc:.6f}\n")
        f.write(f"val_auc,{sgd.val_auc:.6f},{ga.val_auc:.6f}\n")
        f.write(f"test_auc,{sgd.test_auc:.6f},{ga.test_auc:.6f}\n")
        f.write(f"test_improvement_pct,{improvement:.1f},\n")

    txt_path = f"{path_base}.txt"
    rows = [
        ("AUC on train set", sgd.train_auc, ga.train_auc),
        ("AUC on validation set", sgd.val_auc, ga.val_auc),
        ("AUC on test set", sgd.test_auc, ga.test_auc),
    ]
    with open(txt_path, "w") as f:
        f.write(f"{'':26s}{'SGD':>8s}{'GA':>8s}\n")
        for name, a, b in rows:
            f.write(f"{name:26s}{a:8.3f}{b:8.3f}\n")
        f.write(f"Relative test-AUC improvement: {improvement:.1f}%\n")
    return csv_path, txt_path, improvement
