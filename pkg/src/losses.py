"""
Registre de pertes, perte de Taylor régularisée (Ridge), solution fermée,
choix de λ* et apprenant par boosting sur la perte exponentielle
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config import BOOST_ITERATIONS, BOOST_EDGE_CLIP, BOOST_MIN_EDGE, SYMMETRY_TOL
from src.dataset import LabeledDataset
from src.utils import setup_logging, ConfigError, DataError, NumericalError, extreme_eigenvalues

logger = setup_logging()


@dataclass(frozen=True)
class SourceLoss:
    """Perte marginale F avec F(0), F'(0), F''(0)."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    F0: float
    F1: float
    F2: float
    convex: bool = True
    rspl: bool = True


LOSSES: Dict[str, SourceLoss] = {
    "square": SourceLoss("square", lambda z: (1.0 - z) ** 2, 1.0, -2.0, 2.0),
    "logistic": SourceLoss(
        "logistic", lambda z: np.logaddexp(0.0, -z), float(np.log(2.0)), -0.5, 0.25
    ),
    # normalisée pour que F''(0) = 1/2
    "matsushita": SourceLoss(
        "matsushita", lambda z: 0.5 * (np.sqrt(1.0 + z ** 2) - z), 0.5, -0.5, 0.5
    ),
    "exponential": SourceLoss("exponential", lambda z: np.exp(-z), 1.0, -1.0, 1.0, rspl=False),
}


def get_loss(name: str) -> SourceLoss:
    try:
        return LOSSES[name]
    except KeyError:
        raise ConfigError(f"Perte inconnue : {name!r} (disponibles : {sorted(LOSSES)})")


@dataclass(frozen=True)
class TaylorLossSpec:
    """Coefficients (a, b, c) de la perte de Taylor et régularisation γ θᵀΓθ."""

    a: float
    b: float
    c: float
    gamma: float
    Gamma: np.ndarray

    def __post_init__(self):
        Gamma = np.array(self.Gamma, dtype=float, copy=True)
        if Gamma.ndim != 2 or Gamma.shape[0] != Gamma.shape[1]:
            raise ConfigError(f"Γ doit être carrée (reçu {Gamma.shape})")
        if np.max(np.abs(Gamma - Gamma.T), initial=0.0) > SYMMETRY_TOL:
            raise ConfigError("Γ n'est pas symétrique")
        if extreme_eigenvalues(Gamma)[0] <= 0:
            raise ConfigError("Γ n'est pas définie positive")
        if not self.gamma > 0:
            raise ConfigError(f"γ doit être > 0 (reçu {self.gamma})")
        Gamma.setflags(write=False)
        object.__setattr__(self, "Gamma", Gamma)

    @classmethod
    def from_source(
        cls,
        loss: SourceLoss,
        gamma: float,
        d: int,
        Gamma: Optional[np.ndarray] = None,
        c: Optional[float] = None,
    ) -> "TaylorLossSpec":
        """a = F(0), b = F'(0), c = F''(0)/2 par défaut, Γ = I par défaut."""
        return cls(
            a=loss.F0,
            b=loss.F1,
            c=loss.F2 / 2.0 if c is None else float(c),
            gamma=float(gamma),
            Gamma=np.eye(d) if Gamma is None else Gamma,
        )

    @property
    def d(self) -> int:
        return self.Gamma.shape[0]

    @property
    def sign(self) -> float:
        return 1.0 if self.c > 0 else -1.0

    @property
    def nu(self) -> float:
        """ν tel que θ* = ν (sign(c) XXᵀ + ν'Γ)⁻¹ μ."""
        return -self.b / (2.0 * abs(self.c))

    def nu_prime(self, m: int) -> float:
        return m * self.gamma / abs(self.c)

    @property
    def gamma_eig_min(self) -> float:
        return extreme_eigenvalues(self.Gamma)[0]

    @property
    def gamma_eig_max(self) -> float:
        return extreme_eigenvalues(self.Gamma)[1]

    def system_matrix(self, features: np.ndarray) -> np.ndarray:
        """sign(c)·XXᵀ + ν'Γ, inverse de V."""
        return self.sign * features @ features.T + self.nu_prime(features.shape[1]) * self.Gamma

    def theta_star_norm(self, x_star: float) -> float:
        """θ_* = |F'(0)| X_* / (2γ λ↑(Γ))."""
        return abs(self.b) * x_star / (2.0 * self.gamma * self.gamma_eig_min)


@dataclass(frozen=True)
class LinearModel:
    theta: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise NumericalError("Classifieur à coefficients non finis")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.theta))

    def decision(self, features: np.ndarray) -> np.ndarray:
        return self.theta @ features

    def margins(self, ds: LabeledDataset) -> np.ndarray:
        return ds.labels * self.decision(ds.features)

    def error_rate(self, ds: LabeledDataset) -> float:
        """Taux d'erreur de signe (marge ≤ 0 comptée comme erreur)."""
        return float(np.mean(self.margins(ds) <= 0))


def _check_dims(ds: LabeledDataset, theta: np.ndarray, spec: Optional[TaylorLossSpec] = None):
    if theta.size != ds.d or (spec is not None and spec.d != ds.d):
        raise DataError(
            f"Dimensions incompatibles : d={ds.d}, θ={theta.size}"
            + (f", Γ={spec.d}" if spec is not None else "")
        )


# ------------------------------------------------------------------
# Perte de Taylor
# ------------------------------------------------------------------

def taylor_loss_value(ds: LabeledDataset, model: LinearModel, spec: TaylorLossSpec) -> float:
    """a + (b/m)Σ yθᵀx + (c/m)Σ (yθᵀx)² + γ θᵀΓθ."""
    theta = model.theta
    _check_dims(ds, theta, spec)
    z = model.margins(ds)
    return float(
        spec.a + spec.b * np.mean(z) + spec.c * np.mean(z ** 2)
        + spec.gamma * theta @ spec.Gamma @ theta
    )


def taylor_loss_gradient(ds: LabeledDataset, model: LinearModel, spec: TaylorLossSpec) -> np.ndarray:
    theta = model.theta
    _check_dims(ds, theta, spec)
    X, m = ds.features, ds.m
    return (
        spec.b / m * ds.mean_operator()
        + 2.0 * spec.c / m * X @ (X.T @ theta)
        + 2.0 * spec.gamma * spec.Gamma @ theta
    )


def solve_taylor(ds: LabeledDataset, spec: TaylorLossSpec) -> LinearModel:
    """
    Minimum exact de la perte de Taylor :
    θ* = ν (sign(c) XXᵀ + ν'Γ)⁻¹ μ, ν = −F'(0)/(2|c|), ν' = mγ/|c|.
    """
    if spec.c == 0:
        raise NumericalError("c = 0 : pas de solution fermée (perte non bornée)")
    if spec.d != ds.d:
        raise DataError(f"Dimensions incompatibles : d={ds.d}, Γ={spec.d}")

    system = spec.system_matrix(ds.features)
    smallest = extreme_eigenvalues(system)[0]
    if smallest <= 0:
        raise NumericalError(f"Système indéfini : plus petite valeur propre {smallest:.3e}")

    mu = ds.mean_operator()
    theta = spec.nu * np.linalg.solve(system, mu)
    degenerate = not np.any(theta)
    if degenerate:
        logger.warning("⚠️  Opérateur moyen nul : θ* = 0 (optimum dégénéré)")

    bound = spec.theta_star_norm(ds.x_star)
    norm = float(np.linalg.norm(theta))
    if norm > bound * (1.0 + 1e-9):
        message = f"‖θ*‖ = {norm:.6g} dépasse la borne {bound:.6g}"
        if spec.c > 0:
            logger.error(message)
            raise NumericalError(message)
        logger.warning(message)
    return LinearModel(theta, degenerate)


def pick_lambda_star(loss: SourceLoss, lambda_circle: float, x_hat_star: float) -> float:
    """λ* = λ° + F''(0) X̂_*² / 2 (pertes propres symétriques régulières)."""
    if not loss.rspl:
        raise ConfigError(f"λ* n'est défini que pour les pertes RSPL (reçu {loss.name!r})")
    if not lambda_circle > 0:
        raise ConfigError(f"λ° doit être > 0 (reçu {lambda_circle})")
    return lambda_circle + loss.F2 * x_hat_star ** 2 / 2.0


# ------------------------------------------------------------------
# Boosting
# ------------------------------------------------------------------

class ExponentialBooster:
    """
    Boosting par descente de coordonnées sur la perte exponentielle.

    Les apprenants faibles sont les coordonnées brutes h_j(x) = x_j ∈ [−1, 1] ;
    pas fermé à confiance α = ½ ln((1+r)/(1−r)) sur l'avantage pondéré r.
    """

    def __init__(self, iterations: int = BOOST_ITERATIONS):
        if iterations < 1:
            raise ConfigError(f"Nombre d'itérations invalide : {iterations}")
        self.iterations = iterations
        self.theta_: Optional[np.ndarray] = None
        self.loss_history_: List[float] = []
        self.rounds_ = 0

    def fit(self, ds: LabeledDataset) -> "ExponentialBooster":
        X = ds.features
        if np.max(np.abs(X)) > 1.0 + 1e-12:
            raise DataError("Le boosting exige des variables ramenées dans [−1, 1]")

        yX = X * ds.labels
        theta = np.zeros(ds.d)
        margins = np.zeros(ds.m)
        history = [1.0]

        for t in range(self.iterations):
            weights = np.exp(margins.min() - margins)
            weights /= weights.sum()
            edges = yX @ weights
            j = int(np.argmax(np.abs(edges)))
            r = float(edges[j])
            if abs(r) <= BOOST_MIN_EDGE:
                logger.info(f"Boosting arrêté au tour {t} : aucun avantage positif")
                break
            r = float(np.clip(r, -BOOST_EDGE_CLIP, BOOST_EDGE_CLIP))
            alpha = 0.5 * np.log((1.0 + r) / (1.0 - r))
            theta[j] += alpha
            margins += alpha * yX[j]
            history.append(float(np.mean(np.exp(-margins))))
            self.rounds_ = t + 1

        self.theta_ = theta
        self.loss_history_ = history
        return self

    def model(self) -> LinearModel:
        if self.theta_ is None:
            raise ConfigError("Booster non entraîné")
        return LinearModel(self.theta_, degenerate=not np.any(self.theta_))


def boost_linear(ds: LabeledDataset, iterations: int = BOOST_ITERATIONS) -> LinearModel:
    return ExponentialBooster(iterations).fit(ds).model()


def exponential_loss(model: LinearModel, ds: LabeledDataset) -> float:
    return float(np.mean(np.exp(-model.margins(ds))))


def margin_profile(model: LinearModel, ds: LabeledDataset) -> List[Tuple[float, int, int]]:
    """(marge y θᵀx, étiquette, indice) par marge croissante."""
    margins = model.margins(ds)
    order = np.argsort(margins, kind="stable")
    return [(float(margins[i]), int(ds.labels[i]), int(i)) for i in order]
