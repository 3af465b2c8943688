"""
Configuration d'expérience et pilote de validation croisée
(partition, bruit, résolution d'entités, apprentissage, audit)
"""
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import StratifiedKFold
from sklearn.preprocessing import MinMaxScaler

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from config import (
    DATA_DIR,
    OUTPUT_DIR,
    DOMAINS,
    DEFAULT_ER,
    DEFAULT_LEARNER,
    DEFAULT_LOSS,
    DEFAULT_FOLDS,
    DEFAULT_SEED,
    DEFAULT_DELTA,
    DEFAULT_FORMATS,
    REPORT_FORMATS,
    LEARNERS,
    BOOST_ITERATIONS,
    IDEAL_BOOST_ITERATIONS,
)
from src.analyzer import ImmunityAnalyzer, margin_unbounded
from src.bounds import audit_bounds
from src.dataset import (
    LabeledDataset,
    NoiseConfig,
    PartitionSpec,
    apply_neighbor_noise,
    load_csv,
    random_partition,
    vertical_split,
)
from src.er import parse_strategy, required_labels, run_strategy
from src.losses import LinearModel, TaylorLossSpec, boost_linear, get_loss, solve_taylor
from src.permdiag import calibrated_gamma, factorize
from src.utils import setup_logging, ConfigError, json_safe

logger = setup_logging()


@dataclass(frozen=True)
class ExperimentConfig:
    data: Optional[str] = None
    label_col: str = "label"
    domain: Optional[str] = None
    anchor: Tuple[int, ...] = ()
    shuffle: Tuple[int, ...] = ()
    shared: Tuple[int, ...] = ()
    labels_on_peer_b: Optional[str] = None
    noise_p: float = 0.0
    label_noise: float = 0.0
    seed: int = DEFAULT_SEED
    er: str = DEFAULT_ER
    learner: str = DEFAULT_LEARNER
    iters: int = BOOST_ITERATIONS
    loss: str = DEFAULT_LOSS
    gamma: Optional[float] = None
    c: Optional[float] = None
    folds: int = DEFAULT_FOLDS
    audit: bool = False
    delta: float = DEFAULT_DELTA
    output_dir: str = str(OUTPUT_DIR)
    formats: Tuple[str, ...] = DEFAULT_FORMATS

    def __post_init__(self):
        for name in ("anchor", "shuffle", "shared", "formats"):
            value = getattr(self, name)
            if isinstance(value, str):
                value = [tok.strip() for tok in value.split(",") if tok.strip()]
            cast = str if name == "formats" else int
            try:
                object.__setattr__(self, name, tuple(cast(v) for v in value))
            except (TypeError, ValueError):
                raise ConfigError(f"Liste invalide pour {name!r} : {value!r}")

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def from_mapping(cls, mapping: Dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ConfigError(f"Clé(s) de configuration inconnue(s) : {unknown}")
        return cls(**mapping)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        unknown = sorted(set(overrides) - {f.name for f in fields(self)})
        if unknown:
            raise ConfigError(f"Option(s) inconnue(s) : {unknown}")
        return replace(self, **overrides)

    def validate(self) -> "ExperimentConfig":
        if self.folds < 2:
            raise ConfigError(f"folds doit être ≥ 2 (reçu {self.folds})")
        if self.learner not in LEARNERS:
            raise ConfigError(f"Apprenant inconnu : {self.learner!r} (attendu {LEARNERS})")
        if self.iters < 1:
            raise ConfigError(f"iters doit être ≥ 1 (reçu {self.iters})")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ConfigError(f"noise_p hors de [0, 1] : {self.noise_p}")
        if not 0.0 <= self.label_noise <= 0.5:
            raise ConfigError(f"label_noise hors de [0, 0.5] : {self.label_noise}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError(f"gamma doit être > 0 (reçu {self.gamma})")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"delta hors de (0, 1) : {self.delta}")
        bad_formats = sorted(set(self.formats) - set(REPORT_FORMATS))
        if bad_formats:
            raise ConfigError(f"Format(s) de rapport inconnu(s) : {bad_formats}")
        if self.domain is not None and self.domain not in DOMAINS:
            raise ConfigError(f"Domaine inconnu : {self.domain!r} (disponibles : {sorted(DOMAINS)})")
        if self.data is None and self.domain is None:
            raise ConfigError("Aucune source de données : renseigner 'data' ou 'domain'")
        if bool(self.anchor) != bool(self.shuffle):
            raise ConfigError("'anchor' et 'shuffle' se renseignent ensemble")
        parse_strategy(self.er)
        get_loss(self.loss)
        mode = self.peer_b_labels
        if required_labels(self.er) == "clean" and mode == "absent":
            raise ConfigError(f"La stratégie {self.er!r} exige des étiquettes sur le pair B")
        if self.label_noise > 0 and mode != "noisy":
            raise ConfigError(
                f"label_noise = {self.label_noise} exige labels_on_peer_b = 'noisy' (reçu {mode!r})"
            )
        if mode == "noisy" and self.label_noise == 0:
            logger.warning("⚠️  labels_on_peer_b = 'noisy' avec label_noise = 0 : étiquettes de B intactes")
        return self

    @property
    def peer_b_labels(self) -> str:
        return self.labels_on_peer_b or required_labels(self.er)

    @property
    def data_path(self) -> Path:
        if self.data is not None:
            return Path(self.data)
        return DATA_DIR / f"{self.domain}.csv"

    @property
    def shared_features(self) -> Tuple[int, ...]:
        if self.shared or self.domain is None:
            return self.shared
        return tuple(DOMAINS[self.domain]["shared"])

    def to_dict(self) -> Dict:
        out = asdict(self)
        out["output_dir"] = str(self.output_dir)
        return out


def load_config(path) -> ExperimentConfig:
    """Lit un document TOML plat (clé = valeur)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Fichier de configuration introuvable : {path}")
    try:
        with open(path, "rb") as f:
            mapping = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML invalide ({path}) : {e}")
    nested = [k for k, v in mapping.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Le document doit être plat (tables trouvées : {nested})")
    return ExperimentConfig.from_mapping(mapping)


# ------------------------------------------------------------------
# Rapport
# ------------------------------------------------------------------

@dataclass
class RunReport:
    config: Dict
    folds: List[Dict]
    mean_test_error: float
    c_err: float
    curve: List[Tuple[float, float]]
    minimal_immunity_margin: Optional[float]
    histogram: pd.DataFrame = field(repr=False, default_factory=pd.DataFrame)
    alerts: List[str] = field(default_factory=list)

    @property
    def test_errors(self) -> List[float]:
        return [f["test_error"] for f in self.folds]

    @property
    def audited(self) -> bool:
        return any(f.get("bounds") is not None for f in self.folds)

    def to_dict(self) -> Dict:
        # inf et « pas de donnée » deviennent tous deux null : le drapeau les distingue
        folds = [
            {**f, "minimal_immunity_margin_unbounded": margin_unbounded(f.get("minimal_immunity_margin"))}
            for f in self.folds
        ]
        return json_safe({
            "config": self.config,
            "test_errors": self.test_errors,
            "mean_test_error": self.mean_test_error,
            "c_err": self.c_err,
            "minimal_immunity_margin": self.minimal_immunity_margin,
            "minimal_immunity_margin_unbounded": margin_unbounded(self.minimal_immunity_margin),
            "folds": folds,
            "curve": [list(point) for point in self.curve],
            "alerts": self.alerts,
        })


# ------------------------------------------------------------------
# Pilote
# ------------------------------------------------------------------

def _scale(scaler: MinMaxScaler, ds: LabeledDataset) -> LabeledDataset:
    return ds.with_features(scaler.transform(ds.features.T).T)


def _train(learner: str, ds: LabeledDataset, iterations: int, spec: Optional[TaylorLossSpec]) -> LinearModel:
    if learner == "boost":
        return boost_linear(ds, iterations)
    return solve_taylor(ds, spec)


def _taylor_spec(cfg: ExperimentConfig, ds: LabeledDataset) -> TaylorLossSpec:
    loss = get_loss(cfg.loss)
    c = loss.F2 / 2.0 if cfg.c is None else cfg.c
    gamma = cfg.gamma if cfg.gamma is not None else calibrated_gamma(ds, loss, c)
    return TaylorLossSpec.from_source(loss, gamma, ds.d, c=c)


def _peer_only_error(cfg, rows, train: LabeledDataset, test: LabeledDataset) -> Optional[float]:
    """Erreur de test d'un modèle appris sur les seules variables d'un pair."""
    if not rows:
        return None
    train_rows, test_rows = train.restrict_rows(rows), test.restrict_rows(rows)
    spec = _taylor_spec(cfg, train_rows) if cfg.learner == "taylor" else None
    model = _train(cfg.learner, train_rows, cfg.iters, spec)
    return model.error_rate(test_rows)


def _partition_for(cfg: ExperimentConfig, d: int, fold_seed: int) -> PartitionSpec:
    mode = cfg.peer_b_labels
    if cfg.anchor:
        spec = PartitionSpec(cfg.anchor, cfg.shuffle, cfg.shared_features, mode, cfg.label_noise)
    else:
        spec = random_partition(d, cfg.shared_features, fold_seed, mode, cfg.label_noise)
    name, _ = parse_strategy(cfg.er)
    spec.validate(d, require_shared=name != "ideal")
    return spec


def run_fold(
    cfg: ExperimentConfig,
    fold: int,
    train: LabeledDataset,
    test: LabeledDataset,
    analyzer: ImmunityAnalyzer,
) -> Dict:
    fold_seed = cfg.seed * 1000 + fold
    partition = _partition_for(cfg, train.d, fold_seed)

    split = vertical_split(train, partition, seed=fold_seed)
    label_flips = 0
    if split.peer_b.labels is not None:
        label_flips = int(np.sum(split.peer_b.labels != train.labels[split.alignment]))

    noisy_b = apply_neighbor_noise(split.peer_b, NoiseConfig(cfg.noise_p, fold_seed + 1))
    split = replace(split, peer_b=noisy_b)
    resolved = run_strategy(split, cfg.er, seed=fold_seed + 2)

    scaler = MinMaxScaler(feature_range=(-1, 1)).fit(train.features.T)
    S = _scale(scaler, train)
    S_hat = _scale(scaler, resolved.dataset)
    test_scaled = _scale(scaler, test)

    spec = _taylor_spec(cfg, S) if (cfg.learner == "taylor" or cfg.audit) else None
    thetaT = _train(cfg.learner, S_hat, cfg.iters, spec)
    reference_iters = IDEAL_BOOST_ITERATIONS if cfg.learner == "boost" else cfg.iters
    theta0 = _train(cfg.learner, S, reference_iters, spec)

    immunity = analyzer.add_fold(theta0, thetaT, S)
    seq = factorize(resolved.induced_permutation, train.labels)

    report = {
        "fold": fold,
        "train_size": train.m,
        "test_size": test.m,
        "anchor": list(partition.anchor_features),
        "shuffle": list(partition.shuffle_features),
        "shared": list(partition.shared_features),
        "test_error": thetaT.error_rate(test_scaled),
        "c_err": resolved.class_mismatch_rate,
        "peer_b_label_flips": label_flips,
        "T": seq.T,
        "T_plus": seq.T_plus,
        "er_diagnostics": dict(resolved.linkage.diagnostics) if resolved.linkage else {},
        "minimal_immunity_margin": immunity["minimal_immunity_margin"],
        "minimal_immunity_margin_unbounded": immunity["minimal_immunity_margin_unbounded"],
        "baselines": {
            "peer_a_only": _peer_only_error(cfg, list(partition.anchor_features), S, test_scaled),
            "peer_b_only": _peer_only_error(cfg, list(partition.shuffle_features), S, test_scaled),
            "ideal": theta0.error_rate(test_scaled),
        },
        "bounds": None,
    }

    if cfg.audit:
        bounds = audit_bounds(
            S, resolved.induced_permutation, spec, get_loss(cfg.loss), partition,
            delta=cfg.delta, seed=fold_seed,
        )
        report["bounds"] = bounds.to_dict()
    return report


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Validation croisée stratifiée ; déterministe à graines égales."""
    cfg.validate()
    ds = load_csv(cfg.data_path, cfg.label_col)

    skf = StratifiedKFold(n_splits=cfg.folds, shuffle=True, random_state=cfg.seed)
    reference = DOMAINS[cfg.domain]["cerr"] if cfg.domain else None
    analyzer = ImmunityAnalyzer(reference_cerr=reference)

    folds = []
    for fold, (train_idx, test_idx) in enumerate(skf.split(np.zeros(ds.m), ds.labels)):
        logger.info(f"[Pli {fold + 1}/{cfg.folds}] apprentissage sur {train_idx.size} exemple(s)")
        result = run_fold(cfg, fold, ds.subset(train_idx), ds.subset(test_idx), analyzer)
        logger.info(
            f"✅ Pli {fold + 1} : erreur de test {result['test_error'] * 100:.2f}%, "
            f"C.Err {result['c_err'] * 100:.2f}%"
        )
        folds.append(result)

    pooled = analyzer.analyze(folds)
    return RunReport(
        config=cfg.to_dict(),
        folds=folds,
        mean_test_error=float(np.mean([f["test_error"] for f in folds])),
        c_err=float(np.mean([f["c_err"] for f in folds])),
        curve=pooled["curve"],
        minimal_immunity_margin=pooled["minimal_immunity_margin"],
        histogram=pooled["histogram"],
        alerts=pooled["alerts"],
    )
