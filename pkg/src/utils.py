"""
Fonctions utilitaires partagées : logging, exceptions, petits outils numériques
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from config import LOG_FORMAT, LOG_DATE_FORMAT, LOG_FILE


def setup_logging(log_file: Path = LOG_FILE) -> logging.Logger:
    logger = logging.getLogger("LinkFed")
    logger.setLevel(logging.INFO)

    if logger.handlers:
        return logger

    fmt = logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT)

    fh = logging.FileHandler(log_file, encoding="utf-8")
    fh.setLevel(logging.INFO)
    fh.setFormatter(fmt)

    ch = logging.StreamHandler()
    ch.setLevel(logging.INFO)
    ch.setFormatter(fmt)

    logger.addHandler(fh)
    logger.addHandler(ch)
    return logger


# ------------------------------------------------------------------
# Exceptions
# ------------------------------------------------------------------

class LinkFedError(Exception):
    """Erreur de base du simulateur."""


class ConfigError(LinkFedError, ValueError):
    """Configuration invalide (stratégie inconnue, plafond dépassé, ...)."""


class DataError(LinkFedError, ValueError):
    """Données d'entrée invalides (fichier, cellule, dimensions)."""


class NumericalError(LinkFedError, ArithmeticError):
    """Système indéfini, c = 0 ou condition d'inversibilité violée."""


# ------------------------------------------------------------------
# Outils numériques
# ------------------------------------------------------------------

def column_max_norm(features: np.ndarray) -> float:
    """X_* : plus grande norme euclidienne d'une colonne."""
    if features.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(features, axis=0)))


def extreme_eigenvalues(matrix: np.ndarray):
    """(plus petite, plus grande) valeur propre d'une matrice symétrique."""
    eig = np.linalg.eigvalsh(matrix)
    return float(eig[0]), float(eig[-1])


def is_permutation(pi: np.ndarray) -> bool:
    pi = np.asarray(pi)
    if pi.ndim != 1:
        return False
    return np.array_equal(np.sort(pi), np.arange(pi.size))


def json_safe(value):
    """Remplace les flottants non finis par None et les types numpy par des types natifs."""
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    return value


def format_pct(value: Optional[float]) -> str:
    if value is None:
        return "N/A"
    return f"{value * 100:.2f}%"
