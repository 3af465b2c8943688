"""
Module de téléchargement des jeux de données UCI
"""
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd
import requests
from bs4 import BeautifulSoup

from config import (
    UCI_BASE_URL, DOMAINS,
    REQUEST_TIMEOUT, MAX_RETRIES, HEADERS, RAW_DIR, DATA_DIR
)
from src.utils import setup_logging, ConfigError, DataError

logger = setup_logging()


def get_domain(name: str) -> Dict:
    if name not in DOMAINS:
        raise ConfigError(f"Domaine inconnu : {name!r} (disponibles : {', '.join(DOMAINS)})")
    return DOMAINS[name]


class UCIDownloader:
    """Gestionnaire de téléchargement des fichiers du dépôt UCI"""

    def __init__(self, base_url: str = UCI_BASE_URL):
        self.base_url = base_url.rstrip("/")
        self.session = requests.Session()
        self.session.headers.update(HEADERS)

    def _get(self, url: str, **kwargs) -> requests.Response:
        for attempt in range(MAX_RETRIES):
            try:
                response = self.session.get(url, timeout=REQUEST_TIMEOUT, **kwargs)
                response.raise_for_status()
                return response
            except requests.RequestException as e:
                logger.warning(f"Tentative {attempt + 1}/{MAX_RETRIES} échouée: {e}")
                if attempt < MAX_RETRIES - 1:
                    time.sleep(2 ** attempt)  # Backoff exponentiel
                else:
                    logger.error("Échec de connexion après toutes les tentatives")
                    raise

    @staticmethod
    def parse_listing(html: str) -> List[str]:
        """Noms des fichiers d'une page d'index Apache (sous-dossiers et tris exclus)."""
        soup = BeautifulSoup(html, "html.parser")
        files = []
        for link in soup.find_all("a", href=True):
            href = link["href"]
            if href.startswith(("?", "/", "http", "#")) or href.endswith("/"):
                continue
            files.append(href)
        return files

    def get_available_files(self, domain: str) -> List[Tuple[str, str]]:
        """
        Liste les fichiers du dossier UCI d'un domaine

        Returns:
            Liste de tuples (nom_fichier, url)
        """
        preset = get_domain(domain)
        url = f"{self.base_url}/{preset['directory']}/"
        logger.info(f"Récupération de la liste des fichiers depuis {url}")
        response = self._get(url)
        files = [(name, url + name) for name in self.parse_listing(response.text)]
        logger.info(f"{len(files)} fichier(s) trouvé(s) pour {domain}")
        return files

    def download_file(self, url: str, filename: str, output_dir: Path = RAW_DIR) -> Path:
        """
        Télécharge un fichier depuis l'URL (ignoré s'il est déjà présent)
        """
        output_path = Path(output_dir) / filename
        if output_path.exists():
            logger.info(f"Fichier déjà téléchargé: {output_path}")
            return output_path

        logger.info(f"Téléchargement de {filename}...")
        try:
            response = self._get(url, stream=True)
            with open(output_path, "wb") as f:
                for chunk in response.iter_content(chunk_size=8192):
                    if chunk:
                        f.write(chunk)
        except (requests.RequestException, OSError):
            if output_path.exists():
                output_path.unlink()  # Supprimer le fichier partiel
            raise
        logger.info(f"Téléchargement réussi: {output_path}")
        return output_path

    @staticmethod
    def convert_raw(raw_path: Path, preset: Dict, output_path: Path) -> Path:
        """
        Convertit un fichier brut UCI au format CSV attendu par load_csv :
        en-tête f0..f{d-1}, colonne 'label'.
        """
        raw_path = Path(raw_path)
        if not raw_path.exists():
            raise DataError(f"Fichier brut introuvable : {raw_path}")
        df = pd.read_csv(
            raw_path,
            sep=preset["sep"],
            header=0 if preset["header"] else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
        df = df.loc[:, [c for c in df.columns if str(c).strip() != ""]]
        df.columns = range(df.shape[1])
        df = df[df.apply(lambda row: any(v.strip() for v in row), axis=1)]

        label_idx = preset["label"]
        if label_idx >= df.shape[1]:
            raise DataError(f"Colonne d'étiquette {label_idx} absente de {raw_path.name}")
        labels = df[label_idx].str.strip()
        features = df.drop(columns=[label_idx, *preset["drop"]])
        for token, value in preset["missing"].items():
            features = features.replace(token, value)
        features.columns = [f"f{j}" for j in range(features.shape[1])]
        out = features.assign(label=labels.to_numpy())

        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        out.to_csv(output_path, index=False, lineterminator="\n")
        logger.info(
            f"✅ {raw_path.name} converti : {len(out)} observations, "
            f"{features.shape[1]} variables -> {output_path}"
        )
        return output_path

    def download_domain(self, name: str, output_dir: Optional[Path] = None) -> Path:
        """
        Télécharge et convertit un domaine ; renvoie DATA_DIR/<name>.csv.

        Le fichier brut attendu doit figurer dans l'index du dossier UCI,
        sinon DataError. Un fichier brut déjà présent évite toute requête.
        """
        preset = get_domain(name)
        output_dir = Path(output_dir) if output_dir else DATA_DIR
        raw = RAW_DIR / preset["filename"]
        if not raw.exists():
            available = dict(self.get_available_files(name))
            if preset["filename"] not in available:
                raise DataError(
                    f"{preset['filename']} absent de l'index UCI de {name} "
                    f"({len(available)} fichier(s) listé(s))"
                )
            raw = self.download_file(available[preset["filename"]], preset["filename"])
        return self.convert_raw(raw, preset, output_dir / f"{name}.csv")
