"""
Exemples d'utilisation de la bibliothèque linkfed
"""
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.bounds import audit_bounds, build_drift_chain, permuted_sample, verify_exact_drift
from src.dataset import LabeledDataset, NoiseConfig, PartitionSpec, apply_neighbor_noise, vertical_split
from src.er import run_strategy
from src.experiment import ExperimentConfig, run_experiment
from src.losses import TaylorLossSpec, get_loss, solve_taylor
from src.matching import CandidatePairSet, greedy_match, hungarian_match
from src.permdiag import calibrated_gamma, factorize
from src.reporter import RunReporter, emit_reports
from src.utils import format_pct


def synthetic_dataset(m=60, d=6, seed=0) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(d, m))
    y = np.where(X[0] + 0.5 * X[3] - 0.2 * X[5] > 0, 1.0, -1.0)
    return LabeledDataset(X, y)


def example_1_greedy_vs_hungarian():
    """
    Exemple 1 : Appariement glouton contre optimum hongrois
    """
    print("\n" + "=" * 80)
    print("EXEMPLE 1 : Glouton contre hongrois")
    print("=" * 80 + "\n")

    rng = np.random.default_rng(1)
    for n in (4, 8, 16):
        pairs = CandidatePairSet.complete(1.0 + rng.uniform(-1.0, 1.0, (n, n)))
        greedy = greedy_match(pairs).total_similarity
        optimal = hungarian_match(pairs).total_similarity
        print(f"  n = {n:2d} : glouton {greedy:.3f} / optimum {optimal:.3f} (ratio {greedy / optimal:.3f})")


def example_2_strategies():
    """
    Exemple 2 : Les cinq stratégies de résolution sur une partition bruitée
    """
    print("\n" + "=" * 80)
    print("EXEMPLE 2 : Stratégies de résolution d'entités")
    print("=" * 80 + "\n")

    ds = synthetic_dataset()
    partition = PartitionSpec((0, 1, 2), (3, 4, 5), (0, 1), "clean")
    split = vertical_split(ds, partition, seed=2)
    split = replace(split, peer_b=apply_neighbor_noise(split.peer_b, NoiseConfig(0.3, 3)))

    print(f"{'Stratégie':<14} | {'C.Err':>8} | T")
    print("-" * 32)
    for strategy in ("greedy", "per-class", "learned:5", "noisy:0.1", "ideal"):
        resolved = run_strategy(split, strategy, seed=4)
        T = factorize(resolved.induced_permutation, ds.labels).T
        print(f"{strategy:<14} | {format_pct(resolved.class_mismatch_rate):>8} | {T}")


def example_3_exact_drift():
    """
    Exemple 3 : Identité exacte de dérive du classifieur de Taylor
    """
    print("\n" + "=" * 80)
    print("EXEMPLE 3 : Chaîne de dérive")
    print("=" * 80 + "\n")

    ds = synthetic_dataset(m=30, d=4, seed=5)
    partition = PartitionSpec((0, 1), (2, 3), (0,))
    loss = get_loss("logistic")
    c = loss.F2 / 2.0
    spec = TaylorLossSpec.from_source(loss, calibrated_gamma(ds, loss, c), ds.d, c=c)

    rng = np.random.default_rng(6)
    pi = np.arange(ds.m)
    for _ in range(5):
        u, v = rng.choice(ds.m, size=2, replace=False)
        pi[[u, v]] = pi[[v, u]]

    seq = factorize(pi, ds.labels)
    chain = build_drift_chain(ds, seq, spec, partition)
    theta0 = solve_taylor(ds, spec)
    thetaT = solve_taylor(permuted_sample(ds, pi, partition), spec)

    print(f"T = {seq.T} transposition(s), dont {seq.T_plus} entre classes (ρ = {seq.rho:.2f})")
    print(f"Résidu relatif de l'identité      : {verify_exact_drift(chain, theta0, thetaT):.2e}")
    print(f"Écart Sherman–Morrison / inverse : {chain.sm_agreement:.2e}")


def example_4_audit():
    """
    Exemple 4 : Audit des bornes pour une permutation induite
    """
    print("\n" + "=" * 80)
    print("EXEMPLE 4 : Audit des bornes")
    print("=" * 80 + "\n")

    ds = synthetic_dataset(m=40, d=4, seed=7)
    partition = PartitionSpec((0, 1), (2, 3), (0,))
    loss = get_loss("logistic")
    c = loss.F2 / 2.0
    spec = TaylorLossSpec.from_source(loss, calibrated_gamma(ds, loss, c), ds.d, c=c)

    positives = np.flatnonzero(ds.labels > 0)
    pi = np.arange(ds.m)
    pi[positives[:2]] = pi[positives[:2][::-1]]

    report = audit_bounds(ds, pi, spec, loss, partition)
    summary = report.to_dict()
    for key in ("xi", "alpha", "rho", "delta_theta", "c_of_m", "deviation_rhs",
                "deviation_certified_rhs", "loss_gap_rhs"):
        print(f"  {key:<14} : {summary[key]}")
    print(f"  dérive observée : {summary['empirical']['relative_drift']}")
    print(f"  violations      : {summary['violations'] or 'aucune'}")


def example_5_export_to_excel():
    """
    Exemple 5 : Expérience complète sur un CSV et export Excel
    """
    print("\n" + "=" * 80)
    print("EXEMPLE 5 : Expérience et export")
    print("=" * 80 + "\n")

    ds = synthetic_dataset(m=80, d=5, seed=8)
    workdir = Path(tempfile.mkdtemp(prefix="linkfed_"))
    frame = pd.DataFrame(ds.features.T, columns=list(ds.feature_names))
    frame["label"] = np.where(ds.labels > 0, "pos", "neg")
    frame.to_csv(workdir / "synthetic.csv", index=False)

    cfg = ExperimentConfig(
        data=str(workdir / "synthetic.csv"),
        shared=(0, 1),
        noise_p=0.2,
        er="per-class",
        learner="taylor",
        folds=3,
        audit=True,
        output_dir=str(workdir / "out"),
        formats=("json", "csv", "xlsx"),
    )
    report = run_experiment(cfg)
    RunReporter.print_console_report(report)
    for path in emit_reports(report, cfg.output_dir, cfg.formats):
        print(f"✅ {path}")


def run_all_examples():
    """Exécute tous les exemples"""
    examples = [
        example_1_greedy_vs_hungarian,
        example_2_strategies,
        example_3_exact_drift,
        example_4_audit,
        example_5_export_to_excel,
    ]

    print("\n" + "🚀" * 40)
    print("EXÉCUTION DE TOUS LES EXEMPLES")
    print("🚀" * 40)

    for i, example in enumerate(examples, 1):
        try:
            example()
        except Exception as e:
            print(f"\n❌ Erreur dans l'exemple {i} : {e}")


if __name__ == "__main__":
    examples_map = {
        "1": example_1_greedy_vs_hungarian,
        "2": example_2_strategies,
        "3": example_3_exact_drift,
        "4": example_4_audit,
        "5": example_5_export_to_excel,
        "all": run_all_examples,
    }
    if len(sys.argv) > 1 and sys.argv[1] in examples_map:
        examples_map[sys.argv[1]]()
    else:
        print("Usage : python scripts/examples.py [1-5|all]")
