"""
Module d'ingestion des données, de partition verticale entre deux pairs
et de bruitage des variables partagées
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import (
    NEIGHBOR_RADIUS_SMALL,
    NEIGHBOR_RADIUS_LARGE,
    DISTINCT_VALUES_THRESHOLD,
)
from src.utils import setup_logging, ConfigError, DataError, column_max_norm

logger = setup_logging()

LABEL_MODES = ("absent", "clean", "noisy")


def _frozen(array: np.ndarray, dtype=float) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LabeledDataset:
    """Échantillon S : matrice d'observations X (d × m), observations en colonnes."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        features = _frozen(self.features)
        labels = _frozen(self.labels)
        if features.ndim != 2:
            raise DataError(f"La matrice de variables doit être 2D (reçu {features.ndim}D)")
        d, m = features.shape
        if d < 1 or m < 2:
            raise DataError(f"Dimensions invalides : d={d}, m={m} (d ≥ 1, m ≥ 2 requis)")
        if labels.shape != (m,):
            raise DataError(f"{labels.size} étiquettes pour {m} observations")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise DataError("Les étiquettes doivent valoir -1 ou +1")
        if not np.all(np.isfinite(features)):
            raise DataError("Valeurs non finies dans la matrice de variables")
        names = tuple(self.feature_names) or tuple(f"f{j}" for j in range(d))
        if len(names) != d:
            raise DataError(f"{len(names)} noms de variables pour {d} lignes")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)
        if self.x_star <= 0:
            raise DataError("X_* nul : toutes les observations sont nulles")

    @property
    def d(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def x_star(self) -> float:
        return column_max_norm(self.features)

    def mean_operator(self) -> np.ndarray:
        """μ = Σ y_i x_i."""
        return self.features @ self.labels

    def subset(self, columns: Sequence[int]) -> "LabeledDataset":
        columns = np.asarray(columns, dtype=int)
        return LabeledDataset(self.features[:, columns], self.labels[columns], self.feature_names)

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(features, self.labels, self.feature_names)

    def restrict_rows(self, rows: Sequence[int]) -> "LabeledDataset":
        rows = list(rows)
        return LabeledDataset(
            self.features[rows, :], self.labels, tuple(self.feature_names[r] for r in rows)
        )


@dataclass(frozen=True)
class PartitionSpec:
    """Répartition des lignes de X entre le pair A (ancre) et le pair B (mélangé)."""

    anchor_features: Tuple[int, ...]
    shuffle_features: Tuple[int, ...]
    shared_features: Tuple[int, ...] = ()
    labels_on_peer_b: str = "absent"
    label_noise: float = 0.0

    def __post_init__(self):
        for name in ("anchor_features", "shuffle_features", "shared_features"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
        if self.labels_on_peer_b not in LABEL_MODES:
            raise ConfigError(
                f"labels_on_peer_b inconnu : {self.labels_on_peer_b!r} (attendu {LABEL_MODES})"
            )
        if not 0.0 <= self.label_noise <= 0.5:
            raise ConfigError(f"p' hors de [0, 0.5] : {self.label_noise}")

    def validate(self, d: int, require_shared: bool = False):
        anchor, shuffle = set(self.anchor_features), set(self.shuffle_features)
        if anchor & shuffle:
            raise ConfigError(f"Ancre et mélange se recouvrent : {sorted(anchor & shuffle)}")
        every = anchor | shuffle | set(self.shared_features)
        out_of_range = sorted(i for i in every if i < 0 or i >= d)
        if out_of_range:
            raise ConfigError(f"Indices de variables hors de [0, {d - 1}] : {out_of_range}")
        if anchor | shuffle != set(range(d)):
            missing = sorted(set(range(d)) - (anchor | shuffle))
            raise ConfigError(f"Lignes non attribuées à un pair : {missing}")
        if len(anchor) != len(self.anchor_features) or len(shuffle) != len(self.shuffle_features):
            raise ConfigError("Indices dupliqués dans la partition")
        if require_shared and not self.shared_features:
            raise ConfigError("Aucune variable partagée : la résolution d'entités est impossible")


@dataclass(frozen=True)
class NoiseConfig:
    p: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"Probabilité de bruit hors de [0, 1] : {self.p}")

    @staticmethod
    def neighbor_radius(distinct_count: int) -> int:
        if distinct_count > DISTINCT_VALUES_THRESHOLD:
            return NEIGHBOR_RADIUS_LARGE
        return NEIGHBOR_RADIUS_SMALL


@dataclass(frozen=True)
class PeerView:
    """Vue d'un pair : lignes propres (apprentissage) et copies partagées (appariement)."""

    name: str
    features: np.ndarray
    feature_index: Tuple[int, ...]
    shared: np.ndarray
    shared_index: Tuple[int, ...]
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "features", _frozen(self.features))
        object.__setattr__(self, "shared", _frozen(self.shared))
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(self.labels))

    @property
    def m(self) -> int:
        return self.shared.shape[1] if self.shared.size else self.features.shape[1]

    def full_view(self) -> np.ndarray:
        """Copies partagées puis lignes propres, une observation par colonne."""
        return np.vstack([self.shared, self.features])

    def with_labels(self, labels: Optional[np.ndarray]) -> "PeerView":
        return replace(self, labels=labels)


@dataclass(frozen=True)
class VerticalSplit:
    """
    Résultat de la partition verticale. `alignment[j]` est l'entité d'origine
    de la colonne locale j du pair B ; il reste côté harnais.
    """

    peer_a: PeerView
    peer_b: PeerView
    partition: PartitionSpec
    source: LabeledDataset
    alignment: np.ndarray = field(repr=False, default=None)

    def __iter__(self):
        yield self.peer_a
        yield self.peer_b

    def reconstruct(self) -> np.ndarray:
        """Réassemble X à partir des deux pairs et de l'alignement exact."""
        d, m = self.source.d, self.source.m
        X = np.empty((d, m))
        X[list(self.peer_a.feature_index), :] = self.peer_a.features
        restored = np.empty_like(self.peer_b.features)
        restored[:, self.alignment] = self.peer_b.features
        X[list(self.peer_b.feature_index), :] = restored
        return X


# ------------------------------------------------------------------
# Chargement
# ------------------------------------------------------------------

def load_csv(path, label_column: str) -> LabeledDataset:
    """
    Charge un CSV (en-tête obligatoire, une observation par ligne).

    La plus grande valeur brute de l'étiquette (ordre lexicographique) devient +1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Fichier introuvable : {path}")

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except Exception as e:
        raise DataError(f"Lecture CSV impossible ({path}) : {e}")

    label_column = str(label_column)
    if label_column not in df.columns:
        raise DataError(f"Colonne d'étiquette absente : {label_column!r}")

    raw_labels = df[label_column].str.strip()
    if (raw_labels == "").any():
        row = int(np.flatnonzero((raw_labels == "").to_numpy())[0]) + 2
        raise DataError(f"Étiquette vide ligne {row}, colonne {label_column!r}")
    classes = sorted(raw_labels.unique())
    if len(classes) != 2:
        raise DataError(
            f"La colonne {label_column!r} doit contenir 2 valeurs distinctes (trouvé {len(classes)})"
        )
    labels = np.where(raw_labels.to_numpy() == classes[1], 1.0, -1.0)

    feature_frame = df.drop(columns=[label_column])
    if feature_frame.shape[1] == 0:
        raise DataError("Aucune colonne de variables")
    numeric = feature_frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = ~np.isfinite(numeric.to_numpy(dtype=float))
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        cell = feature_frame.iat[row, col]
        raise DataError(
            f"Cellule non numérique ligne {row + 2}, colonne {feature_frame.columns[col]!r} : {cell!r}"
        )

    ds = LabeledDataset(
        numeric.to_numpy(dtype=float).T, labels, tuple(str(c) for c in feature_frame.columns)
    )
    logger.info(
        f"Jeu chargé : {path.name} (m={ds.m}, d={ds.d}, "
        f"+1 = {classes[1]!r}, -1 = {classes[0]!r})"
    )
    return ds


# ------------------------------------------------------------------
# Partition verticale
# ------------------------------------------------------------------

def random_partition(
    d: int,
    shared: Sequence[int],
    seed: int,
    labels_on_peer_b: str = "absent",
    label_noise: float = 0.0,
) -> PartitionSpec:
    """Variables partagées côté ancre, le reste tiré au hasard entre les deux pairs."""
    shared = sorted(set(int(i) for i in shared))
    rest = np.array([j for j in range(d) if j not in shared], dtype=int)
    rng = np.random.default_rng(seed)
    rng.shuffle(rest)
    if rest.size == 0:
        raise ConfigError("Toutes les variables sont partagées : aucun bloc mélangé")
    n_anchor = rest.size // 2 if shared else (rest.size + 1) // 2
    n_anchor = min(n_anchor, rest.size - 1)
    anchor = sorted(shared + rest[:n_anchor].tolist())
    shuffle = sorted(rest[n_anchor:].tolist())
    if not anchor:
        raise ConfigError("Impossible de donner au moins une variable à chaque pair")
    return PartitionSpec(tuple(anchor), tuple(shuffle), tuple(shared), labels_on_peer_b, label_noise)


def swap_label_noise(labels: np.ndarray, p_prime: float, rng: np.random.Generator):
    """
    round(m·p') itérations : une étiquette positive et une négative tirées
    parmi les étiquettes courantes échangent leur classe.

    Returns:
        (étiquettes bruitées, nombre d'échanges effectués)
    """
    labels = np.array(labels, dtype=float, copy=True)
    target = int(np.floor(labels.size * p_prime + 0.5))
    done = 0
    for _ in range(target):
        positives = np.flatnonzero(labels > 0)
        negatives = np.flatnonzero(labels < 0)
        if positives.size == 0 or negatives.size == 0:
            logger.warning(f"⚠️  Classe épuisée après {done} échange(s) sur {target}")
            break
        i = positives[rng.integers(positives.size)]
        j = negatives[rng.integers(negatives.size)]
        labels[i], labels[j] = -1.0, 1.0
        done += 1
    return labels, done


def vertical_split(ds: LabeledDataset, spec: PartitionSpec, seed: int = 0) -> VerticalSplit:
    """
    Sépare S entre le pair A (ancre + copies partagées + étiquettes) et le pair B
    (lignes mélangées + copies partagées), colonnes de B dans un ordre local aléatoire.
    """
    spec.validate(ds.d)
    rng = np.random.default_rng(seed)
    alignment = rng.permutation(ds.m)

    X, y = ds.features, ds.labels
    shared = list(spec.shared_features)
    peer_a = PeerView(
        name="A",
        features=X[list(spec.anchor_features), :],
        feature_index=spec.anchor_features,
        shared=X[shared, :] if shared else np.empty((0, ds.m)),
        shared_index=spec.shared_features,
        labels=y,
    )

    labels_b = None
    if spec.labels_on_peer_b == "clean":
        labels_b = y[alignment]
    elif spec.labels_on_peer_b == "noisy":
        labels_b, swaps = swap_label_noise(y[alignment], spec.label_noise, rng)
        logger.info(f"Bruit d'étiquettes sur B : {swaps} échange(s) (p' = {spec.label_noise})")

    peer_b = PeerView(
        name="B",
        features=X[list(spec.shuffle_features), :][:, alignment],
        feature_index=spec.shuffle_features,
        shared=X[shared, :][:, alignment] if shared else np.empty((0, ds.m)),
        shared_index=spec.shared_features,
        labels=labels_b,
    )
    logger.info(
        f"Partition verticale : A={len(spec.anchor_features)} variable(s), "
        f"B={len(spec.shuffle_features)} variable(s), {len(shared)} partagée(s)"
    )
    return VerticalSplit(peer_a, peer_b, spec, ds, alignment)


# ------------------------------------------------------------------
# Bruit sur les variables partagées
# ------------------------------------------------------------------

def _noisify_row(values: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    distinct = np.unique(values)
    k = distinct.size
    hit = rng.random(values.size) < p
    if k < 2 or not hit.any():
        return values.copy()

    out = values.copy()
    idx = np.searchsorted(distinct, values[hit])
    if k == 2:
        out[hit] = distinct[1 - idx]
        return out

    u = NoiseConfig.neighbor_radius(k)
    lo = np.maximum(idx - u, 0)
    hi = np.minimum(idx + u, k - 1)
    width = hi - lo  # fenêtre sans la valeur courante
    pos = lo + np.floor(rng.random(idx.size) * width).astype(int)
    pos = np.where(pos >= idx, pos + 1, pos)
    out[hit] = distinct[pos]
    return out


def apply_neighbor_noise(view: PeerView, cfg: NoiseConfig) -> PeerView:
    """
    Remplace chaque cellule partagée avec probabilité p : bascule pour une variable
    binaire, sinon tirage uniforme parmi les ±u voisins (ordre trié) de la valeur
    courante, borné à l'ensemble observé.
    """
    if cfg.p == 0.0 or view.shared.size == 0:
        return view

    rng = np.random.default_rng(cfg.rng_seed)
    noisy = np.vstack([_noisify_row(row, cfg.p, rng) for row in view.shared])
    changed = int(np.sum(noisy != view.shared))
    logger.info(f"Bruit p={cfg.p} sur le pair {view.name} : {changed} cellule(s) modifiée(s)")
    return replace(view, shared=noisy)
