"""
Configuration centralisée pour le simulateur linkfed
(apprentissage fédéré vertical avec résolution d'entités bruitée)
"""
from pathlib import Path
from datetime import datetime

# ==================== CHEMINS ====================
BASE_DIR   = Path(__file__).parent
DATA_DIR   = BASE_DIR / "data"
RAW_DIR    = DATA_DIR / "raw"
OUTPUT_DIR = BASE_DIR / "output"
LOG_DIR    = BASE_DIR / "logs"

for directory in [DATA_DIR, RAW_DIR, OUTPUT_DIR, LOG_DIR]:
    directory.mkdir(parents=True, exist_ok=True)

# ==================== FICHIERS DE SORTIE ====================
REPORT_FILENAME    = "report.json"
MARGINS_FILENAME   = "margins.csv"
BOUNDS_FILENAME    = "bounds.json"
HISTOGRAM_FILENAME = "margin_histogram.csv"
EXCEL_FILENAME     = "report.xlsx"
REPORT_FORMATS     = ("json", "csv", "xlsx")
DEFAULT_FORMATS    = ("json", "csv")

# ==================== BRUIT SUR LES VARIABLES PARTAGÉES ====================
NEIGHBOR_RADIUS_SMALL   = 2    # u quand peu de valeurs distinctes
NEIGHBOR_RADIUS_LARGE   = 10   # u quand plus de DISTINCT_VALUES_THRESHOLD valeurs
DISTINCT_VALUES_THRESHOLD = 20

# ==================== RÉSOLUTION D'ENTITÉS ====================
ER_STRATEGIES      = ("greedy", "per-class", "learned", "noisy", "ideal")
DEFAULT_ER         = "greedy"
DEFAULT_KNN_K      = 5
ORACLE_CAP         = 64     # taille max pour l'oracle hongrois

# ==================== APPRENTISSAGE ====================
LEARNERS               = ("taylor", "boost")
DEFAULT_LEARNER        = "boost"
BOOST_ITERATIONS       = 1000
IDEAL_BOOST_ITERATIONS = 2000   # modèle de référence pour les marges
BOOST_EDGE_CLIP        = 1.0 - 1e-10
BOOST_MIN_EDGE         = 1e-12
DEFAULT_LOSS           = "logistic"
CALIBRATION_SAFETY     = 1.5

# ==================== DIAGNOSTICS ====================
CHAIN_MAX_STEPS      = 64
CHAIN_MAX_DIM        = 256
DIRECTION_SAMPLES    = 256
REFINE_DIRECTIONS    = 256
REFINE_EPSILON_GRID  = 21
DEFAULT_DELTA        = 0.05
SYMMETRY_TOL         = 1e-10
INVERTIBILITY_TOL    = 1e-12
HISTOGRAM_BINS       = 20

# ==================== VALIDATION CROISÉE ====================
DEFAULT_FOLDS = 5
DEFAULT_SEED  = 7

# ==================== CODES DE SORTIE ====================
EXIT_OK           = 0
EXIT_FAILURE      = 1
EXIT_CONFIG_ERROR = 2
EXIT_DATA_ERROR   = 3

# ==================== RÉSEAU (UCI) ====================
UCI_BASE_URL    = "https://archive.ics.uci.edu/ml/machine-learning-databases"
REQUEST_TIMEOUT = 30
MAX_RETRIES     = 3
HEADERS = {
    "User-Agent": (
        "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 "
        "(KHTML, like Gecko) Chrome/120.0.0.0 Safari/537.36"
    ),
    "Accept": "text/html,application/xhtml+xml,application/xml;q=0.9,*/*;q=0.8",
    "Accept-Language": "fr-FR,fr;q=0.9,en-US;q=0.8,en;q=0.7",
    "Connection": "keep-alive",
}

# ==================== DOMAINES UCI ====================
# shared : indices des variables partagées (après suppression des colonnes drop)
# cerr   : C.Err de référence (%) de l'ER glouton
DOMAINS = {
    "breast-wisc": {
        "directory": "breast-cancer-wisconsin",
        "filename": "breast-cancer-wisconsin.data",
        "sep": ",", "header": False, "drop": [0], "label": 10,
        "missing": {"?": "1"},
        "shared": [0, 1], "cerr": 9.21,
    },
    "transfusion_H": {
        "directory": "blood-transfusion",
        "filename": "transfusion.data",
        "sep": ",", "header": True, "drop": [], "label": 4,
        "missing": {},
        "shared": [0], "cerr": 17.36,
    },
    "transfusion_L": {
        "directory": "blood-transfusion",
        "filename": "transfusion.data",
        "sep": ",", "header": True, "drop": [], "label": 4,
        "missing": {},
        "shared": [3], "cerr": 17.80,
    },
    "banknote": {
        "directory": "00267",
        "filename": "data_banknote_authentication.txt",
        "sep": ",", "header": False, "drop": [], "label": 4,
        "missing": {},
        "shared": [0], "cerr": 13.14,
    },
    "ionosphere": {
        "directory": "ionosphere",
        "filename": "ionosphere.data",
        "sep": ",", "header": False, "drop": [1], "label": 34,
        "missing": {},
        "shared": [0], "cerr": 20.57,
    },
    "sonar": {
        "directory": "undocumented/connectionist-bench/sonar",
        "filename": "sonar.all-data",
        "sep": ",", "header": False, "drop": [], "label": 60,
        "missing": {},
        "shared": [0, 1, 2], "cerr": 3.69,
    },
    "magic": {
        "directory": "magic",
        "filename": "magic04.data",
        "sep": ",", "header": False, "drop": [], "label": 10,
        "missing": {},
        "shared": [0, 1, 2, 3], "cerr": 1e-4,
    },
    "fertility": {
        "directory": "00244",
        "filename": "fertility_Diagnosis.txt",
        "sep": ",", "header": False, "drop": [], "label": 9,
        "missing": {},
        "shared": [2, 3, 4], "cerr": 12.22,
    },
}

# ==================== LOGGING ====================
LOG_FORMAT      = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
LOG_FILE        = LOG_DIR / f"linkfed_{datetime.now().strftime('%Y%m')}.log"
