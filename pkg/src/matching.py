"""
Similarité cosinus et appariement biparti de poids maximal
(glouton, et oracle hongrois exact pour les petites instances)
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from config import ORACLE_CAP
from src.utils import setup_logging, ConfigError, DataError

logger = setup_logging()


@dataclass(frozen=True)
class CandidatePairSet:
    """Paires candidates (i_A, i_B) et leurs scores de similarité."""

    pairs: np.ndarray
    scores: np.ndarray
    n_a: int
    n_b: int

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=int).reshape(-1, 2)
        scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if pairs.shape[0] != scores.size:
            raise DataError(f"{pairs.shape[0]} paires pour {scores.size} scores")
        if pairs.size and (
            pairs[:, 0].min() < 0 or pairs[:, 0].max() >= self.n_a
            or pairs[:, 1].min() < 0 or pairs[:, 1].max() >= self.n_b
        ):
            raise DataError("Indice de paire hors bornes")
        if not np.all(np.isfinite(scores)):
            raise DataError("Scores de similarité non finis")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def complete(cls, matrix: np.ndarray) -> "CandidatePairSet":
        """Toutes les paires de [n_a] × [n_b], scores lus dans la matrice."""
        matrix = np.asarray(matrix, dtype=float)
        n_a, n_b = matrix.shape
        ia, ib = np.meshgrid(np.arange(n_a), np.arange(n_b), indexing="ij")
        pairs = np.column_stack([ia.ravel(), ib.ravel()])
        return cls(pairs, matrix.ravel(), n_a, n_b)

    @classmethod
    def from_rows(cls, matrix: np.ndarray, rows_a, rows_b) -> "CandidatePairSet":
        """Sous-instance complète restreinte à rows_a × rows_b (indices d'origine conservés)."""
        rows_a = np.asarray(rows_a, dtype=int)
        rows_b = np.asarray(rows_b, dtype=int)
        ia, ib = np.meshgrid(rows_a, rows_b, indexing="ij")
        pairs = np.column_stack([ia.ravel(), ib.ravel()])
        return cls(pairs, matrix[ia, ib].ravel(), matrix.shape[0], matrix.shape[1])

    def to_matrix(self) -> np.ndarray:
        if self.pairs.shape[0] != self.n_a * self.n_b:
            raise ConfigError("L'oracle hongrois exige une instance complète")
        matrix = np.full((self.n_a, self.n_b), np.nan)
        matrix[self.pairs[:, 0], self.pairs[:, 1]] = self.scores
        if np.isnan(matrix).any():
            raise ConfigError("L'oracle hongrois exige une instance complète")
        return matrix


@dataclass(frozen=True)
class Matching:
    matched_pairs: Tuple[Tuple[int, int], ...]
    total_similarity: float
    unmatched_a: Tuple[int, ...] = ()
    unmatched_b: Tuple[int, ...] = ()

    def __len__(self):
        return len(self.matched_pairs)

    def mapping(self, n_a: int) -> np.ndarray:
        """Tableau a -> b (-1 pour les sommets non appariés)."""
        out = np.full(n_a, -1, dtype=int)
        for ia, ib in self.matched_pairs:
            out[ia] = ib
        return out


# ------------------------------------------------------------------
# Similarité
# ------------------------------------------------------------------

def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size or a.size == 0:
        raise DataError(f"Longueurs incompatibles : {a.size} et {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def similarity_matrix(shared_a: np.ndarray, shared_b: np.ndarray) -> np.ndarray:
    """Cosinus entre colonnes : entrée (i, j) = cos(a_i, b_j)."""
    shared_a = np.asarray(shared_a, dtype=float)
    shared_b = np.asarray(shared_b, dtype=float)
    if shared_a.shape[0] != shared_b.shape[0] or shared_a.shape[0] == 0:
        raise DataError("Les vues partagées n'ont pas le même nombre de lignes")
    na = np.linalg.norm(shared_a, axis=0)
    nb = np.linalg.norm(shared_b, axis=0)
    ua = np.divide(shared_a, na, out=np.zeros_like(shared_a), where=na > 0)
    ub = np.divide(shared_b, nb, out=np.zeros_like(shared_b), where=nb > 0)
    return np.clip(ua.T @ ub, -1.0, 1.0)


# ------------------------------------------------------------------
# Appariements
# ------------------------------------------------------------------

def greedy_match(s: CandidatePairSet) -> Matching:
    """
    Glouton : prend la paire restante de similarité maximale, retire ses deux
    extrémités, recommence. Égalités départagées par i_A puis i_B croissants.
    """
    if s.pairs.shape[0] == 0:
        return Matching((), 0.0)

    ia, ib = s.pairs[:, 0], s.pairs[:, 1]
    order = np.lexsort((ib, ia, -s.scores))
    used_a = np.zeros(s.n_a, dtype=bool)
    used_b = np.zeros(s.n_b, dtype=bool)
    chosen, weights = [], []
    capacity = min(np.unique(ia).size, np.unique(ib).size)

    for k in order:
        a, b = ia[k], ib[k]
        if used_a[a] or used_b[b]:
            continue
        used_a[a] = used_b[b] = True
        chosen.append((int(a), int(b)))
        weights.append(s.scores[k])
        if len(chosen) == capacity:
            break

    unmatched_a = tuple(int(i) for i in np.unique(ia) if not used_a[i])
    unmatched_b = tuple(int(i) for i in np.unique(ib) if not used_b[i])
    if unmatched_a and unmatched_b:
        logger.warning(
            f"⚠️  {len(unmatched_a)} sommet(s) A et {len(unmatched_b)} sommet(s) B "
            f"sans paire candidate restante"
        )
    return Matching(tuple(chosen), math.fsum(weights), unmatched_a, unmatched_b)


def hungarian_match(s: CandidatePairSet, cap: int = ORACLE_CAP) -> Matching:
    """Appariement parfait de poids total maximal (oracle exact, petites instances)."""
    if max(s.n_a, s.n_b) > cap:
        raise ConfigError(f"Instance {s.n_a}×{s.n_b} au-delà du plafond de l'oracle ({cap})")
    matrix = s.to_matrix()
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    pairs = tuple((int(r), int(c)) for r, c in zip(rows, cols))
    return Matching(pairs, math.fsum(matrix[rows, cols]))
