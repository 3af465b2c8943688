"""
Analyse d'immunité aux erreurs de résolution d'entités : courbe d'erreur cumulée
au-dessus d'une marge du classifieur idéal, marge minimale d'immunité, alertes
"""
import math
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config import HISTOGRAM_BINS
from src.dataset import LabeledDataset
from src.losses import LinearModel
from src.utils import setup_logging

logger = setup_logging()


def margin_unbounded(margin: Optional[float]) -> bool:
    """Vrai si aucune marge observée n'immunise (marge minimale infinie)."""
    return margin is not None and math.isinf(margin)


def immunity_curve(margins: np.ndarray, errors: np.ndarray) -> Dict:
    """
    Pour chaque marge observée x (θ_0) : part des erreurs de θ_T dont la marge θ_0
    est ≥ x. Marge minimale d'immunité : plus petite marge observée sans erreur
    au-dessus (inf si l'exemple de marge maximale est une erreur).
    """
    margins = np.asarray(margins, dtype=float)
    errors = np.asarray(errors, dtype=bool)
    if margins.size == 0:
        return {"curve": [], "minimal_immunity_margin": None,
                "minimal_immunity_margin_unbounded": False, "errors": 0}

    order = np.argsort(margins, kind="stable")
    margins, errors = margins[order], errors[order]
    values, first = np.unique(margins, return_index=True)
    total = int(errors.sum())

    # erreurs dont la marge est ≥ x : somme suffixe
    suffix = np.cumsum(errors[::-1])[::-1]
    if total:
        cumulative = suffix[first] / total
    else:
        cumulative = np.zeros(values.size)
    curve = [(float(x), float(ce)) for x, ce in zip(values, cumulative)]

    if total == 0:
        minimal = float(values[0])
    else:
        worst = float(margins[errors].max())
        minimal = math.inf if worst >= values[-1] else worst
    return {
        "curve": curve,
        "minimal_immunity_margin": minimal,
        "minimal_immunity_margin_unbounded": margin_unbounded(minimal),
        "errors": total,
    }


def margin_immunity_analysis(theta0: LinearModel, thetaT: LinearModel, S: LabeledDataset) -> Dict:
    margins0 = theta0.margins(S)
    errors = thetaT.margins(S) <= 0
    return immunity_curve(margins0, errors)


def margin_histogram(margins: np.ndarray, errors: np.ndarray, bins: int = HISTOGRAM_BINS) -> pd.DataFrame:
    """Répartition des marges θ_0 : effectifs et erreurs de θ_T par classe de marge."""
    columns = ["bin_left", "bin_right", "count", "errors"]
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return pd.DataFrame(columns=columns)
    edges = np.histogram_bin_edges(margins, bins=bins)
    counts, _ = np.histogram(margins, bins=edges)
    err_counts, _ = np.histogram(margins[np.asarray(errors, dtype=bool)], bins=edges)
    return pd.DataFrame(
        {"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts, "errors": err_counts},
        columns=columns,
    )


class ImmunityAnalyzer:
    """Agrège les marges des plis et détecte les situations à signaler."""

    def __init__(self, reference_cerr: Optional[float] = None):
        self.reference_cerr = reference_cerr
        self._margins: List[np.ndarray] = []
        self._errors: List[np.ndarray] = []

    def add_fold(self, theta0: LinearModel, thetaT: LinearModel, S: LabeledDataset) -> Dict:
        margins0 = theta0.margins(S)
        errors = thetaT.margins(S) <= 0
        self._margins.append(margins0)
        self._errors.append(errors)
        return immunity_curve(margins0, errors)

    # ------------------------------------------------------------------
    # Synthèse
    # ------------------------------------------------------------------

    def analyze(self, fold_reports: List[Dict]) -> Dict:
        margins = np.concatenate(self._margins) if self._margins else np.empty(0)
        errors = np.concatenate(self._errors) if self._errors else np.empty(0, dtype=bool)
        pooled = immunity_curve(margins, errors)
        pooled["histogram"] = margin_histogram(margins, errors)
        pooled["alerts"] = self._detect_alerts(fold_reports)
        return pooled

    def _detect_alerts(self, fold_reports: List[Dict]) -> List[str]:
        alerts = []
        if self.reference_cerr is not None and fold_reports:
            mean_cerr = float(np.mean([f["c_err"] for f in fold_reports])) * 100
            ref = self.reference_cerr
            if ref > 0 and not ref / 3 <= mean_cerr <= ref * 3:
                alerts.append(
                    f"⚠️  C.Err moyen {mean_cerr:.2f}% loin de la référence du domaine ({ref:.2f}%)"
                )
        for f in fold_reports:
            bounds = f.get("bounds") or {}
            if bounds.get("violations"):
                status = "préconditions OK" if all(bounds["preconditions"].values()) else "observation"
                alerts.append(f"⚠️  Pli {f['fold']} : bornes dépassées {bounds['violations']} ({status})")
        for alert in alerts:
            logger.warning(alert)
        return alerts
