"""
Diagnostic de la permutation induite par la résolution d'entités :
factorisation en transpositions, précision (ε, τ), ξ, α, ρ,
paramètres clés δθ / δP / δS et vérification de la calibration données-modèle
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import DIRECTION_SAMPLES, REFINE_DIRECTIONS, REFINE_EPSILON_GRID, CALIBRATION_SAFETY
from src.dataset import LabeledDataset, PartitionSpec
from src.losses import LinearModel, SourceLoss, TaylorLossSpec
from src.utils import setup_logging, DataError, is_permutation

logger = setup_logging()

ALPHA_UNBOUNDED = "unbounded-violation"


@dataclass(frozen=True)
class TranspositionSequence:
    """P* = ∏ P_t, chaque P_t échangeant les colonnes (u_t, v_t)."""

    swaps: Tuple[Tuple[int, int], ...]
    m: int
    T_plus: int

    @property
    def T(self) -> int:
        return len(self.swaps)

    @property
    def rho(self) -> float:
        return self.T_plus / self.T if self.T else 0.0


def factorize(pi, labels: Optional[np.ndarray] = None) -> TranspositionSequence:
    """
    Décomposition en cycles : (longueur − 1) transpositions par cycle, T minimal.
    Rejouer les échanges sur l'identité redonne π.
    """
    pi = np.asarray(pi, dtype=int)
    if not is_permutation(pi):
        raise DataError("La permutation fournie n'est pas une bijection de [m]")
    m = pi.size
    arrangement = np.arange(m)
    position = np.arange(m)
    swaps = []
    for i in range(m):
        if arrangement[i] == pi[i]:
            continue
        j = int(position[pi[i]])
        a, b = arrangement[i], arrangement[j]
        arrangement[i], arrangement[j] = b, a
        position[a], position[b] = j, i
        swaps.append((i, j))

    T_plus = 0
    if labels is not None:
        labels = np.asarray(labels)
        T_plus = sum(1 for u, v in swaps if labels[u] != labels[v])
    return TranspositionSequence(tuple(swaps), m, T_plus)


def replay(seq: TranspositionSequence, upto: Optional[int] = None) -> np.ndarray:
    """Arrangement des blocs mélangés après les `upto` premiers échanges."""
    arrangement = np.arange(seq.m)
    for u, v in seq.swaps[: seq.T if upto is None else upto]:
        arrangement[[u, v]] = arrangement[[v, u]]
    return arrangement


# ------------------------------------------------------------------
# Précision (ε, τ)
# ------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyProfile:
    epsilon: float
    tau: float
    xi: float
    alpha: Optional[float]
    alpha_status: str
    x_star: float
    T: int
    m: int
    refined: Optional[Dict[str, float]] = None
    accurate: bool = True

    @property
    def alpha_bounded(self) -> bool:
        return self.alpha is not None


def compute_alpha(T: int, m: int, xi: float) -> Tuple[Optional[float], str]:
    """α = min(1, 1 − 2 ln T / ln(m/ξ)) ; 1 si T ≤ 1 ; violation si ≤ 0."""
    if T <= 1 or xi == 0.0:
        return 1.0, "bounded"
    if m / xi <= 1.0:
        return None, ALPHA_UNBOUNDED
    alpha = min(1.0, 1.0 - 2.0 * math.log(T) / math.log(m / xi))
    if alpha <= 0.0:
        return None, ALPHA_UNBOUNDED
    return alpha, "bounded"


def _accuracy_terms(S: LabeledDataset, seq: TranspositionSequence, partition: PartitionSpec):
    """Vecteurs dont les normes bornent τ à ε = 0, par étape."""
    anchor = list(partition.anchor_features)
    shuffle = list(partition.shuffle_features)
    X = S.features
    X_S = X[shuffle, :]
    arrangement = np.arange(seq.m)
    for u, v in seq.swaps:
        yield "anchor", X[anchor, u] - X[anchor, v]
        yield "pair", X_S[:, u] - X_S[:, v]
        yield "shuffle", X_S[:, arrangement[u]] - X_S[:, arrangement[v]]
        arrangement[[u, v]] = arrangement[[v, u]]
        moved = np.flatnonzero(arrangement != np.arange(seq.m))
        if moved.size:
            yield "drift", X_S[:, arrangement[moved]] - X_S[:, moved]


def estimate_accuracy(
    S: LabeledDataset,
    seq: TranspositionSequence,
    partition: PartitionSpec,
    refine: bool = False,
    seed: int = 0,
) -> AccuracyProfile:
    """
    Profil exact à ε = 0 : τ = plus grande norme des écarts (x̂_ti − x_i)_S et
    (x_u − x_v)_F. Borné par 3X_*.
    """
    if seq.m != S.m:
        raise DataError(f"Séquence sur {seq.m} colonnes pour m={S.m}")
    x_star = S.x_star
    tau = 0.0
    for _, vectors in _accuracy_terms(S, seq, partition):
        if vectors.size:
            tau = max(tau, float(np.max(np.linalg.norm(vectors.reshape(vectors.shape[0], -1), axis=0))))
    tau = min(tau, 3.0 * x_star)
    xi = tau / x_star
    alpha, status = compute_alpha(seq.T, S.m, xi)
    accurate = _accuracy_holds(S, seq, partition, tau, seed)
    if not accurate:
        logger.warning(f"⚠️  Profil (ε = 0, τ = {tau:.4g}) démenti sur l'ensemble de directions")

    refined = _refine_accuracy(S, seq, partition, seed) if refine and seq.T else None
    return AccuracyProfile(0.0, tau, xi, alpha, status, x_star, seq.T, S.m, refined, accurate)


def _accuracy_holds(S, seq, partition, tau, seed) -> bool:
    """|vᵀw_F| ≤ τ pour chaque écart v et chaque direction unitaire w de direction_set."""
    W = direction_set(S, seed)
    anchor = list(partition.anchor_features)
    shuffle = list(partition.shuffle_features)
    worst = 0.0
    for kind, vectors in _accuracy_terms(S, seq, partition):
        if vectors.size:
            block = W[anchor if kind == "anchor" else shuffle]
            worst = max(worst, float(np.max(np.abs(vectors.T @ block))))
    return worst <= tau + 1e-9 * max(1.0, tau)


def _refine_accuracy(S, seq, partition, seed) -> Dict[str, float]:
    """
    Recherche échantillonnée de (ε, τ) de ξ plus petit sur des directions
    unitaires aléatoires ; valable seulement pour les directions tirées.
    """
    rng = np.random.default_rng(seed)
    d = S.d
    W = rng.standard_normal((d, REFINE_DIRECTIONS))
    W /= np.linalg.norm(W, axis=0)
    X = S.features
    anchor = list(partition.anchor_features)
    shuffle = list(partition.shuffle_features)

    lhs_rows, rhs_rows = [], []
    arrangement = np.arange(seq.m)
    for u, v in seq.swaps:
        arrangement[[u, v]] = arrangement[[v, u]]
        moved = np.flatnonzero(arrangement != np.arange(seq.m))
        if moved.size:
            diff = X[shuffle][:, arrangement[moved]] - X[shuffle][:, moved]
            lhs_rows.append(np.abs(diff.T @ W[shuffle]))
            rhs_rows.append(np.abs(X[:, moved].T @ W))
        for rows in (anchor, shuffle):
            if rows:
                diff = X[rows, u] - X[rows, v]
                lhs_rows.append(np.abs(diff @ W[rows])[None, :])
                rhs_rows.append(np.maximum(np.abs(X[:, u] @ W), np.abs(X[:, v] @ W))[None, :])
    if not lhs_rows:
        return {"epsilon": 0.0, "tau": 0.0, "xi": 0.0}
    lhs = np.vstack(lhs_rows)
    rhs = np.vstack(rhs_rows)

    best = None
    for eps in np.linspace(0.0, 1.0, REFINE_EPSILON_GRID):
        tau = float(np.max(np.maximum(lhs - eps * rhs, 0.0)))
        xi = eps + tau / S.x_star
        if best is None or xi < best["xi"]:
            best = {"epsilon": float(eps), "tau": tau, "xi": xi}
    return best


# ------------------------------------------------------------------
# Paramètres clés
# ------------------------------------------------------------------

@dataclass(frozen=True)
class KeyParams:
    delta_theta: float
    delta_perm: float
    delta_set: float
    c_of_m: Optional[float]


def compute_key_params(
    theta0: LinearModel,
    S: LabeledDataset,
    profile: AccuracyProfile,
    seq: TranspositionSequence,
) -> KeyParams:
    x_star = S.x_star
    delta_theta = theta0.norm * x_star
    delta_set = float(np.linalg.norm(S.mean_operator()) / (S.m * x_star))
    if seq.T == 0:
        return KeyParams(delta_theta, 0.0, delta_set, 0.0)
    delta_perm = math.sqrt(profile.xi) * seq.rho / 4.0
    c_of_m = (profile.xi / S.m) ** profile.alpha if profile.alpha_bounded else None
    return KeyParams(delta_theta, delta_perm, delta_set, c_of_m)


# ------------------------------------------------------------------
# Calibration données-modèle
# ------------------------------------------------------------------

def direction_set(S: LabeledDataset, seed: int = 0, samples: int = DIRECTION_SAMPLES) -> np.ndarray:
    """Axes principaux de XXᵀ et directions unitaires aléatoires (en colonnes)."""
    _, axes = np.linalg.eigh(S.features @ S.features.T)
    rng = np.random.default_rng(seed)
    random_dirs = rng.standard_normal((S.d, samples))
    random_dirs /= np.linalg.norm(random_dirs, axis=0)
    return np.hstack([axes, random_dirs])


def stretch_moments(S: LabeledDataset, directions: np.ndarray):
    """Moyenne des carrés μ_s(w) et variance v_s(w) des étirements |xᵀw|/‖w‖."""
    stretches = np.abs(S.features.T @ directions) / np.linalg.norm(directions, axis=0)
    return np.mean(stretches ** 2, axis=0), np.var(stretches, axis=0)


def estimate_u(S: LabeledDataset, spec: TaylorLossSpec, profile: AccuracyProfile, seed: int = 0) -> float:
    """Estimation (par échantillonnage de directions) de U(sign(c))."""
    mu_s, v_s = stretch_moments(S, direction_set(S, seed))
    eps = profile.epsilon
    if spec.c > 0:
        values = spec.c * (1.0 - eps) ** 2 * v_s
    else:
        values = spec.c * ((1.0 + eps) ** 2 * mu_s + profile.tau ** 2)
    return float(np.min(values))


@dataclass(frozen=True)
class CalibrationReport:
    a_pass: bool
    a_margin: float
    b_pass: bool
    b_margin: float
    u_estimate: float
    notes: Tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return self.a_pass and self.b_pass

    def to_dict(self) -> Dict:
        return {
            "a": {"pass": self.a_pass, "margin": self.a_margin},
            "b": {"pass": self.b_pass, "margin": self.b_margin},
            "u_estimate": self.u_estimate,
        }


def check_calibration(
    S: LabeledDataset,
    spec: TaylorLossSpec,
    profile: AccuracyProfile,
    loss: SourceLoss,
    seed: int = 0,
) -> CalibrationReport:
    """
    (a) X_*²/(U/2 + γλ↑(Γ)) ≤ ½ min{1/|F'(0)|, 1/(2|c|)} ;
    (b) m ≥ 4ξ. U est une estimation.
    """
    u = estimate_u(S, spec, profile, seed)
    inv_f1 = math.inf if loss.F1 == 0 else 1.0 / abs(loss.F1)
    rhs = 0.5 * min(inv_f1, 1.0 / (2.0 * abs(spec.c)))
    denominator = u / 2.0 + spec.gamma * spec.gamma_eig_min
    notes = ["U estimé par échantillonnage de directions"]
    if denominator <= 0:
        a_pass, a_margin = False, -math.inf
        notes.append("dénominateur de (a) non positif")
    else:
        lhs = S.x_star ** 2 / denominator
        a_margin = rhs - lhs
        a_pass = a_margin >= 0
    b_margin = S.m - 4.0 * profile.xi
    report = CalibrationReport(a_pass, a_margin, b_margin >= 0, b_margin, u, tuple(notes))
    if not report.passed:
        logger.warning(
            f"⚠️  Calibration non satisfaite (a: {a_pass}, b: {report.b_pass})"
        )
    return report


def calibrated_gamma(
    S: LabeledDataset,
    loss: SourceLoss,
    c: float,
    Gamma: Optional[np.ndarray] = None,
    safety: float = CALIBRATION_SAFETY,
) -> float:
    """Plus petit γ satisfaisant (a) avec U = 0, multiplié par une marge de sécurité."""
    eig_min = 1.0 if Gamma is None else float(np.linalg.eigvalsh(Gamma)[0])
    needed = 2.0 * S.x_star ** 2 * max(abs(loss.F1), 2.0 * abs(c)) / eig_min
    return safety * needed
