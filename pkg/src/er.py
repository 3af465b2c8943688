"""
Stratégies de résolution d'entités entre le pair A (étiquettes) et le pair B

Chaque stratégie ne voit que les vues des pairs et rend une `Linkage`
(colonne locale de B associée à chaque observation de A). L'échantillon
reconstruit Ŝ et la permutation induite sont assemblés ensuite par
`resolve`, seul point où l'alignement exact intervient.
"""
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
from scipy.spatial.distance import cdist

from config import DEFAULT_KNN_K
from src.dataset import LabeledDataset, PeerView, VerticalSplit, swap_label_noise
from src.matching import CandidatePairSet, greedy_match, similarity_matrix
from src.utils import setup_logging, ConfigError, DataError, is_permutation

logger = setup_logging()


@dataclass(frozen=True)
class Linkage:
    """a_to_b[i] : colonne locale du pair B liée à l'observation i du pair A."""

    a_to_b: np.ndarray
    similarities: np.ndarray
    strategy: str
    diagnostics: Dict = field(default_factory=dict)

    def __post_init__(self):
        if not is_permutation(self.a_to_b):
            raise DataError(f"Liaison non bijective produite par {self.strategy!r}")


@dataclass(frozen=True)
class ResolvedSample:
    dataset: LabeledDataset
    induced_permutation: np.ndarray
    class_mismatch_rate: float
    linkage: Optional[Linkage] = None


# ------------------------------------------------------------------
# Briques communes
# ------------------------------------------------------------------

def _shared_similarity(peer_a: PeerView, peer_b: PeerView) -> np.ndarray:
    if peer_a.shared.shape[0] == 0 or peer_b.shared.shape[0] == 0:
        raise ConfigError("Aucune variable partagée : la résolution d'entités est impossible")
    return similarity_matrix(peer_a.shared, peer_b.shared)


def _greedy_subset(sim: np.ndarray, rows_a, rows_b, a_to_b: np.ndarray, scores: np.ndarray) -> int:
    """Glouton restreint à rows_a × rows_b ; écrit dans a_to_b / scores."""
    if len(rows_a) == 0 or len(rows_b) == 0:
        return 0
    matching = greedy_match(CandidatePairSet.from_rows(sim, rows_a, rows_b))
    for ia, ib in matching.matched_pairs:
        a_to_b[ia] = ib
        scores[ia] = sim[ia, ib]
    return len(matching)


def _per_class_link(sim: np.ndarray, labels_a: np.ndarray, labels_b: np.ndarray, name: str) -> Linkage:
    """Glouton dans S⁺ puis dans S⁻, puis passe résiduelle inter-classes."""
    m = sim.shape[0]
    a_to_b = np.full(m, -1, dtype=int)
    scores = np.zeros(m)
    for label in (1.0, -1.0):
        _greedy_subset(
            sim, np.flatnonzero(labels_a == label), np.flatnonzero(labels_b == label), a_to_b, scores
        )

    left_a = np.flatnonzero(a_to_b < 0)
    used_b = np.zeros(m, dtype=bool)
    used_b[a_to_b[a_to_b >= 0]] = True
    left_b = np.flatnonzero(~used_b)
    if left_a.size != left_b.size:
        logger.error(f"❌ Ensembles résiduels de tailles différentes : {left_a.size} / {left_b.size}")
        raise DataError("Résidus de tailles différentes après l'appariement par classe")
    residual = _greedy_subset(sim, left_a, left_b, a_to_b, scores)
    if residual:
        logger.info(f"{residual} paire(s) résiduelle(s) appariée(s) entre classes")
    return Linkage(a_to_b, scores, name, {"residual_pairs": residual})


# ------------------------------------------------------------------
# Stratégies
# ------------------------------------------------------------------

def greedy_er(peer_a: PeerView, peer_b: PeerView) -> Linkage:
    """Glouton sur l'instance complète [m] × [m], cosinus des vecteurs partagés."""
    sim = _shared_similarity(peer_a, peer_b)
    a_to_b = np.full(sim.shape[0], -1, dtype=int)
    scores = np.zeros(sim.shape[0])
    _greedy_subset(sim, np.arange(sim.shape[0]), np.arange(sim.shape[1]), a_to_b, scores)
    return Linkage(a_to_b, scores, "greedy")


def greedy_er_per_class(peer_a: PeerView, peer_b: PeerView) -> Linkage:
    """Glouton dans chaque classe (étiquettes présentes sur les deux pairs)."""
    if peer_b.labels is None:
        raise ConfigError("Stratégie par classe : étiquettes absentes sur le pair B")
    sim = _shared_similarity(peer_a, peer_b)
    return _per_class_link(sim, peer_a.labels, peer_b.labels, "per-class")


def knn_labels(
    queries: np.ndarray, pool: np.ndarray, labels: np.ndarray, k: int
) -> np.ndarray:
    """
    k plus proches voisins (distance euclidienne entre colonnes) ; égalités de
    distance par position croissante dans le lot, vote majoritaire, égalité -> +1.
    """
    dist = cdist(queries.T, pool.T)
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    votes = labels[order].sum(axis=1)
    return np.where(votes >= 0, 1.0, -1.0)


def greedy_er_learned_classes(peer_a: PeerView, peer_b: PeerView, k: int = DEFAULT_KNN_K) -> Linkage:
    """
    (i) glouton complet, rejet des paires sous la similarité médiane ς,
    propagation des étiquettes de A ; (ii) k-NN dans B pour le reste ;
    (iii) glouton par classe sur les étiquettes prédites ; (iv) résidus.
    """
    if k < 1:
        raise ConfigError(f"k doit être ≥ 1 (reçu {k})")
    sim = _shared_similarity(peer_a, peer_b)
    m = sim.shape[0]

    first = greedy_er(peer_a, peer_b)
    median = float(np.median(first.similarities))
    kept = first.similarities >= median
    labels_b = np.zeros(m)
    labels_b[first.a_to_b[kept]] = peer_a.labels[kept]
    labeled = np.flatnonzero(labels_b != 0)
    unlabeled = np.flatnonzero(labels_b == 0)
    logger.info(f"Étape (i) : {labeled.size} étiquette(s) propagée(s), médiane ς = {median:.4f}")

    k_used = k
    if unlabeled.size:
        if k > labeled.size:
            k_used = labeled.size
            logger.warning(f"⚠️  k = {k} ramené à la taille du lot étiqueté ({k_used})")
        view = peer_b.full_view()
        labels_b[unlabeled] = knn_labels(
            view[:, unlabeled], view[:, labeled], labels_b[labeled], k_used
        )

    link = _per_class_link(sim, peer_a.labels, labels_b, "learned")
    diagnostics = dict(link.diagnostics, median=median, propagated=int(labeled.size), k_used=k_used)
    return replace(link, diagnostics=diagnostics)


def greedy_er_noisy_classes(
    peer_a: PeerView, peer_b: PeerView, p_prime: float, seed: int = 0
) -> Linkage:
    """round(m·p') échanges d'étiquettes (+, −) dans B, puis appariement par classe."""
    if peer_b.labels is None:
        raise ConfigError("Stratégie à classes bruitées : étiquettes absentes sur le pair B")
    if not 0.0 <= p_prime <= 0.5:
        raise ConfigError(f"p' hors de [0, 0.5] : {p_prime}")
    noisy, swaps = swap_label_noise(peer_b.labels, p_prime, np.random.default_rng(seed))
    sim = _shared_similarity(peer_a, peer_b)
    link = _per_class_link(sim, peer_a.labels, noisy, "noisy")
    return replace(link, diagnostics=dict(link.diagnostics, label_swaps=swaps))


def ideal_er(split: VerticalSplit) -> Linkage:
    """Liaison exacte (utilise l'alignement détenu par le harnais)."""
    a_to_b = np.argsort(split.alignment)
    return Linkage(a_to_b, np.ones(split.source.m), "ideal")


# ------------------------------------------------------------------
# Reconstruction
# ------------------------------------------------------------------

def resolve(split: VerticalSplit, linkage: Linkage) -> ResolvedSample:
    """
    Ŝ : lignes de l'ancre inchangées, blocs mélangés pris dans B selon la liaison ;
    π(i) = entité d'origine du bloc joint à i.
    """
    src = split.source
    X_hat = np.empty_like(src.features)
    X_hat[list(split.peer_a.feature_index), :] = split.peer_a.features
    X_hat[list(split.peer_b.feature_index), :] = split.peer_b.features[:, linkage.a_to_b]
    pi = np.asarray(split.alignment)[linkage.a_to_b]
    mismatch = int(np.sum(src.labels != src.labels[pi]))
    dataset = LabeledDataset(X_hat, split.peer_a.labels, src.feature_names)
    return ResolvedSample(dataset, pi, mismatch / src.m, linkage)


def parse_strategy(text: str):
    """'greedy' | 'per-class' | 'learned:k' | 'noisy:p' | 'ideal' -> (nom, paramètre)."""
    name, _, arg = str(text).partition(":")
    name = name.strip()
    if name in ("greedy", "per-class", "ideal"):
        if arg:
            raise ConfigError(f"La stratégie {name!r} ne prend pas de paramètre")
        return name, None
    if name == "learned":
        try:
            return name, int(arg) if arg else DEFAULT_KNN_K
        except ValueError:
            raise ConfigError(f"k invalide : {arg!r}")
    if name == "noisy":
        try:
            return name, float(arg) if arg else 0.0
        except ValueError:
            raise ConfigError(f"p' invalide : {arg!r}")
    raise ConfigError(f"Stratégie inconnue : {text!r}")


def required_labels(strategy: str) -> str:
    """Mode d'étiquetage du pair B requis par une stratégie."""
    name, _ = parse_strategy(strategy)
    return "clean" if name in ("per-class", "noisy") else "absent"


def run_strategy(split: VerticalSplit, strategy: str, seed: int = 0) -> ResolvedSample:
    name, arg = parse_strategy(strategy)
    peer_a, peer_b = split.peer_a, split.peer_b
    if name in ("per-class", "noisy") and peer_b.labels is None:
        raise ConfigError(f"La stratégie {strategy!r} exige des étiquettes sur le pair B")

    if name == "greedy":
        linkage = greedy_er(peer_a, peer_b)
    elif name == "per-class":
        linkage = greedy_er_per_class(peer_a, peer_b)
    elif name == "learned":
        linkage = greedy_er_learned_classes(peer_a, peer_b.with_labels(None), arg)
    elif name == "noisy":
        linkage = greedy_er_noisy_classes(peer_a, peer_b, arg, seed)
    else:
        linkage = ideal_er(split)

    resolved = resolve(split, linkage)
    logger.info(f"ER {strategy} : C.Err = {resolved.class_mismatch_rate * 100:.2f}%")
    return resolved
