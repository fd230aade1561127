import os

# Run ledger
DATABASE_URL = os.environ.get("DATABASE_URL", "sqlite:///sdp_runs.db")

# Logging
LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")

# Rank and uniqueness thresholds
RANK_EPS = float(os.environ.get("RANK_EPS", 1e-6))
UNIQUE_EPS = float(os.environ.get("UNIQUE_EPS", 1e-6))
SURJECTIVE_TOL = float(os.environ.get("SURJECTIVE_TOL", 1e-10))

# Splitting solver
SOLVER_TOL_FEAS = float(os.environ.get("SOLVER_TOL_FEAS", 1e-7))
SOLVER_TOL_GAP = float(os.environ.get("SOLVER_TOL_GAP", 1e-7))
SOLVER_MAX_ITERS = int(os.environ.get("SOLVER_MAX_ITERS", 50_000))
SOLVER_ALPHA = float(os.environ.get("SOLVER_ALPHA", 1.6))
SOLVER_RHO = float(os.environ.get("SOLVER_RHO", 1.0))

# Burer-Monteiro
BM_MAX_ITERS = int(os.environ.get("BM_MAX_ITERS", 20_000))
BM_MAX_ESCAPES = int(os.environ.get("BM_MAX_ESCAPES", 50))

# Golfing scheme
GOLFING_C0 = float(os.environ.get("GOLFING_C0", 4.0))

# Trial pool
MAX_WORKERS = int(os.environ.get("MAX_WORKERS", 4))
USE_RAY = os.environ.get("USE_RAY", "false").lower() in ("1", "true", "yes")
