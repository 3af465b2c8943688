"""
Script principal : simulation d'apprentissage fédéré vertical avec résolution d'entités bruitée
"""
import argparse
import sys

import requests

from config import (
    DOMAINS,
    ER_STRATEGIES,
    LEARNERS,
    EXIT_OK,
    EXIT_FAILURE,
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
)
from src.downloader import UCIDownloader
from src.experiment import ExperimentConfig, load_config, run_experiment
from src.reporter import RunReporter, emit_reports
from src.utils import setup_logging, ConfigError, DataError

logger = setup_logging()


def run_linkfed(cfg: ExperimentConfig) -> int:
    """
    Exécute une expérience complète et écrit les rapports

    Args:
        cfg: Configuration (fichier TOML et options de ligne de commande fusionnés)

    Returns:
        Code de sortie
    """
    logger.info("=" * 80)
    logger.info("DÉMARRAGE DE L'EXPÉRIENCE LINKFED")
    logger.info("=" * 80)

    try:
        logger.info("\n[Étape 1/3] Validation de la configuration...")
        cfg.validate()
        logger.info(f"✅ Données : {cfg.data_path} | ER : {cfg.er} | apprenant : {cfg.learner}")

        logger.info(f"\n[Étape 2/3] Validation croisée ({cfg.folds} plis)...")
        report = run_experiment(cfg)
        logger.info(f"✅ Erreur de test moyenne : {report.mean_test_error * 100:.2f}%")
        if report.alerts:
            logger.info(f"   - ⚠️  {len(report.alerts)} alerte(s) détectée(s)")

        logger.info("\n[Étape 3/3] Génération des rapports...")
        for path in emit_reports(report, cfg.output_dir, cfg.formats):
            logger.info(f"✅ {path}")

        RunReporter.print_console_report(report)

        logger.info("\n" + "=" * 80)
        logger.info("✅ TRAITEMENT TERMINÉ AVEC SUCCÈS")
        logger.info("=" * 80)
        return EXIT_OK

    except ConfigError as e:
        logger.error(f"❌ Erreur de configuration : {e}")
        return EXIT_CONFIG_ERROR
    except DataError as e:
        logger.error(f"❌ Erreur de données : {e}")
        return EXIT_DATA_ERROR
    except Exception as e:
        logger.error(f"\n❌ ERREUR FATALE : {e}", exc_info=True)
        return EXIT_FAILURE


def download_domain(name: str) -> int:
    """Télécharge et convertit un domaine UCI."""
    try:
        path = UCIDownloader().download_domain(name)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG_ERROR
    except DataError as e:
        logger.error(f"❌ {e}")
        return EXIT_DATA_ERROR
    except requests.RequestException as e:
        logger.error(f"❌ Téléchargement impossible : {e}")
        return EXIT_FAILURE
    print(f"✓ {name} disponible : {path}")
    return EXIT_OK


def list_domains() -> int:
    """Affiche les domaines préconfigurés."""
    print(f"\n{'=' * 80}")
    print(f"DOMAINES DISPONIBLES ({len(DOMAINS)})")
    print(f"{'=' * 80}\n")
    for i, (name, preset) in enumerate(DOMAINS.items(), 1):
        shared = ",".join(str(j) for j in preset["shared"])
        print(f"{i:2d}. {name:<15} partagées : {shared:<10} C.Err de référence : {preset['cerr']}%")
    print(f"\n{'=' * 80}")
    return EXIT_OK


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    return base.with_overrides(
        data=args.data,
        label_col=args.label_col,
        domain=args.domain,
        anchor=args.anchor,
        shuffle=args.shuffle,
        shared=args.shared,
        labels_on_peer_b=args.labels_on_peer_b,
        label_noise=args.label_noise,
        noise_p=args.noise_p,
        seed=args.seed,
        er=args.er,
        learner=args.learner,
        iters=args.iters,
        loss=args.loss,
        gamma=args.gamma,
        c=args.c,
        folds=args.folds,
        audit=True if args.audit else None,
        delta=args.delta,
        output_dir=args.output_dir,
        formats=args.formats,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkfed",
        description="Apprentissage fédéré vertical et résolution d'entités bruitée",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exemples d'utilisation:
  %(prog)s run --config configs/breast_wisc.toml       # Expérience décrite par un fichier
  %(prog)s run --domain sonar --er learned:5 --audit   # Options seules
  %(prog)s run --data data.csv --shared 0,1 --noise-p 0.1
  %(prog)s download --domain breast-wisc               # Télécharge un jeu UCI
  %(prog)s domains                                     # Liste les domaines préconfigurés
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Lancer une expérience")
    run.add_argument("--config", type=str, help="Fichier TOML plat")
    run.add_argument("--data", type=str, help="CSV d'entrée (en-tête obligatoire)")
    run.add_argument("--label-col", type=str, help="Colonne d'étiquette (défaut: label)")
    run.add_argument("--domain", type=str, choices=sorted(DOMAINS), help="Domaine UCI préconfiguré")
    run.add_argument("--anchor", type=str, help="Indices des variables du pair A (ex: 0,1,2)")
    run.add_argument("--shuffle", type=str, help="Indices des variables du pair B")
    run.add_argument("--shared", type=str, help="Indices des variables partagées")
    run.add_argument("--labels-on-peer-b", type=str, choices=["absent", "clean", "noisy"],
                     help="Étiquettes détenues par le pair B")
    run.add_argument("--label-noise", type=float,
                     help="Part p' d'échanges d'étiquettes entre classes sur B (avec --labels-on-peer-b noisy)")
    run.add_argument("--noise-p", type=float, help="Probabilité de bruit sur les variables partagées de B")
    run.add_argument("--seed", type=int, help="Graine aléatoire")
    run.add_argument("--er", type=str, help=f"Stratégie de résolution ({'|'.join(ER_STRATEGIES)})")
    run.add_argument("--learner", type=str, choices=list(LEARNERS), help="Apprenant")
    run.add_argument("--iters", type=int, help="Itérations du boosting")
    run.add_argument("--loss", type=str, help="Perte source (square|logistic|matsushita)")
    run.add_argument("--gamma", type=float, help="Régularisation γ (défaut: calibrée)")
    run.add_argument("--c", type=float, help="Coefficient quadratique de la perte de Taylor")
    run.add_argument("--folds", type=int, help="Nombre de plis")
    run.add_argument("--audit", action="store_true", help="Auditer les bornes théoriques")
    run.add_argument("--delta", type=float, help="Niveau de confiance δ de la borne de généralisation")
    run.add_argument("--output-dir", type=str, help="Dossier des rapports")
    run.add_argument("--formats", type=str, help="Formats de rapport (json,csv,xlsx)")

    download = sub.add_parser("download", help="Télécharger un jeu de données UCI")
    download.add_argument("--domain", type=str, required=True, help="Nom du domaine")

    sub.add_parser("domains", help="Lister les domaines préconfigurés")
    return parser


def main(argv=None) -> int:
    """Point d'entrée principal"""
    args = build_parser().parse_args(argv)

    if args.command == "domains":
        return list_domains()
    if args.command == "download":
        return download_domain(args.domain)

    try:
        cfg = build_config(args)
    except ConfigError as e:
        logger.error(f"❌ Erreur de configuration : {e}")
        return EXIT_CONFIG_ERROR
    return run_linkfed(cfg)


if __name__ == "__main__":
    sys.exit(main())
