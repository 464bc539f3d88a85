# === Tolerances ===
EPS_MOD: float = 1e-9       # modularity classification of float set functions
EPS_LP: float = 1e-9        # superreplication slack
EPS_TIE: float = 1e-12      # argmax near-tie recording

# === PDE defaults (delta_s = 1/10, delta_t = 1/300, domain [-7, 7]^2) ===
DEFAULT_DELTA_S: float = 0.1
DEFAULT_K_STEPS: int = 300
DEFAULT_M_CELLS: int = 70

# === Gaussian limits ===
# Tensor Gauss-Hermite order per latent rank; rank one is integrated adaptively.
QUADRATURE_ORDERS = {2: 160, 3: 64}
QUADRATURE_ORDER_FALLBACK: int = 20
DEFAULT_MC_SAMPLES: int = 1_000_000
MC_BATCH: int = 200_000

# === Census ===
CENSUS_MAX_DIM: int = 5
CENSUS_CHUNK: int = 50_000

# === Verification ===
MAX_VERIFY_PATHS: int = 10_000_000

# Worker threads for chunked census enumeration.
DEFAULT_THREADS: int = 1

