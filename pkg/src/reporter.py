"""
Module de génération des rapports d'expérience
"""
import json
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd

from config import (
    REPORT_FILENAME,
    MARGINS_FILENAME,
    BOUNDS_FILENAME,
    HISTOGRAM_FILENAME,
    EXCEL_FILENAME,
)
from src.experiment import RunReport
from src.utils import setup_logging, ConfigError, format_pct, json_safe

logger = setup_logging()


def _dump_json(payload: Dict, output_file: Path):
    text = json.dumps(json_safe(payload), indent=2, ensure_ascii=False, allow_nan=False)
    with open(output_file, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")


class RunReporter:
    """Générateur des rapports d'une exécution"""

    @staticmethod
    def generate_json_report(report: RunReport, output_file: Path):
        _dump_json(report.to_dict(), output_file)
        logger.info(f"Rapport JSON sauvegardé : {output_file}")

    @staticmethod
    def generate_margins_csv(report: RunReport, output_file: Path):
        """Courbe d'immunité : colonnes margin, cumulative_error."""
        df = pd.DataFrame(report.curve, columns=["margin", "cumulative_error"])
        df.to_csv(output_file, index=False, lineterminator="\n")
        logger.info(f"Courbe des marges sauvegardée : {output_file}")

    @staticmethod
    def generate_histogram_csv(report: RunReport, output_file: Path):
        report.histogram.to_csv(output_file, index=False, lineterminator="\n")
        logger.info(f"Histogramme des marges sauvegardé : {output_file}")

    @staticmethod
    def generate_bounds_json(report: RunReport, output_file: Path):
        payload = {"folds": [{"fold": f["fold"], **(f["bounds"] or {})} for f in report.folds]}
        _dump_json(payload, output_file)
        logger.info(f"Rapport des bornes sauvegardé : {output_file}")

    @staticmethod
    def generate_excel_report(report: RunReport, output_file: Path):
        """
        Génère un rapport Excel avec plusieurs feuilles

        Args:
            report: Résultat de run_experiment
            output_file: Fichier de sortie Excel
        """
        folds = pd.DataFrame([
            {
                "Pli": f["fold"],
                "Erreur de test (%)": f["test_error"] * 100,
                "C.Err (%)": f["c_err"] * 100,
                "T": f["T"],
                "T+": f["T_plus"],
                "Marge min. d'immunité": f["minimal_immunity_margin"],
                "Pair A seul (%)": _pct_or_none(f["baselines"]["peer_a_only"]),
                "Pair B seul (%)": _pct_or_none(f["baselines"]["peer_b_only"]),
                "Idéal (%)": f["baselines"]["ideal"] * 100,
            }
            for f in report.folds
        ])
        curve = pd.DataFrame(report.curve, columns=["Marge", "Erreur cumulée"])

        with pd.ExcelWriter(output_file, engine="openpyxl") as writer:
            folds.to_excel(writer, sheet_name="Plis", index=False)
            curve.to_excel(writer, sheet_name="Marges", index=False)
            report.histogram.to_excel(writer, sheet_name="Histogramme", index=False)
            if report.audited:
                rows = []
                for f in report.folds:
                    b = f["bounds"]
                    rows.append({
                        "Pli": f["fold"],
                        "ξ": b["xi"],
                        "α": b["alpha"],
                        "ρ": b["rho"],
                        "δθ": b["delta_theta"],
                        "δP": b["delta_perm"],
                        "δS": b["delta_set"],
                        "C(m)": b["c_of_m"],
                        "Dérive observée": b["empirical"].get("relative_drift"),
                        "Borne de dérive": b["deviation_rhs"],
                        "Borne de dérive certifiée": b.get("deviation_certified_rhs"),
                        "Écart de perte": b["empirical"].get("loss_gap"),
                        "Borne d'écart": b["loss_gap_rhs"],
                    })
                pd.DataFrame(rows).to_excel(writer, sheet_name="Bornes", index=False)
        logger.info(f"Rapport Excel sauvegardé : {output_file}")

    @staticmethod
    def generate_text_report(report: RunReport) -> str:
        """Résumé lisible, affiché en console uniquement."""
        cfg = report.config
        lines = ["=" * 80, "RAPPORT D'EXPÉRIENCE : RÉSOLUTION D'ENTITÉS ET APPRENTISSAGE FÉDÉRÉ", "=" * 80, ""]
        lines.append(f"📦 Données      : {cfg.get('domain') or cfg.get('data')}")
        lines.append(f"🔗 Stratégie ER : {cfg['er']}  (bruit p = {cfg['noise_p']})")
        lines.append(f"🧮 Apprenant    : {cfg['learner']}  ({cfg['folds']} plis, graine {cfg['seed']})")
        lines.append("")
        lines.append("-" * 80)
        lines.append("📊 RÉSULTATS PAR PLI")
        lines.append("-" * 80)
        for f in report.folds:
            lines.append(
                f"  • Pli {f['fold']} : erreur {format_pct(f['test_error'])}, "
                f"C.Err {format_pct(f['c_err'])}, T = {f['T']} (T+ = {f['T_plus']})"
            )
        lines.append("")
        lines.append(f"Erreur de test moyenne : {format_pct(report.mean_test_error)}")
        lines.append(f"C.Err moyen            : {format_pct(report.c_err)}")
        margin = report.minimal_immunity_margin
        lines.append(f"Marge min. d'immunité  : {'∞' if margin == float('inf') else margin}")
        lines.append("")
        if report.alerts:
            lines.append("-" * 80)
            lines.append("⚠️  ALERTES")
            lines.append("-" * 80)
            lines.extend(f"  {alert}" for alert in report.alerts)
        else:
            lines.append("✅ Aucune alerte")
        lines.append("")
        lines.append("=" * 80)
        lines.append(f"Rapport généré le {datetime.now().strftime('%d/%m/%Y à %H:%M:%S')}")
        lines.append("=" * 80)
        return "\n".join(lines)

    @staticmethod
    def print_console_report(report: RunReport):
        print(RunReporter.generate_text_report(report))


def _pct_or_none(value: Optional[float]) -> Optional[float]:
    return None if value is None else value * 100


def emit_reports(report: RunReport, output_dir, formats: Iterable[str] = ("json", "csv")) -> List[Path]:
    """
    Écrit report.json, margins.csv, margin_histogram.csv, bounds.json (si audit)
    et report.xlsx (format 'xlsx').
    """
    output_dir = Path(output_dir)
    formats = set(formats)
    written: List[Path] = []
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            RunReporter.generate_json_report(report, output_dir / REPORT_FILENAME)
            written.append(output_dir / REPORT_FILENAME)
            if report.audited:
                RunReporter.generate_bounds_json(report, output_dir / BOUNDS_FILENAME)
                written.append(output_dir / BOUNDS_FILENAME)
        if "csv" in formats:
            RunReporter.generate_margins_csv(report, output_dir / MARGINS_FILENAME)
            RunReporter.generate_histogram_csv(report, output_dir / HISTOGRAM_FILENAME)
            written.extend([output_dir / MARGINS_FILENAME, output_dir / HISTOGRAM_FILENAME])
        if "xlsx" in formats:
            RunReporter.generate_excel_report(report, output_dir / EXCEL_FILENAME)
            written.append(output_dir / EXCEL_FILENAME)
    except OSError as e:
        logger.error(f"❌ Écriture impossible dans {output_dir} : {e}")
        raise ConfigError(f"Répertoire de sortie non inscriptible : {output_dir}")
    return written
