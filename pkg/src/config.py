import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Execution
THREADS = int(os.getenv("HEATFLOW_THREADS", 1))
OUTPUT_DIR = os.getenv("HEATFLOW_OUTPUT_DIR", "output")
CHUNK_ROWS = int(os.getenv("HEATFLOW_CHUNK_ROWS", 4096))

# Logging
LOG_LEVEL = os.getenv("HEATFLOW_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("HEATFLOW_LOG_FILE", "")

# Size guards
DENSE_GUARD = int(os.getenv("HEATFLOW_DENSE_GUARD", 20000))
ORACLE_GUARD = int(os.getenv("HEATFLOW_ORACLE_GUARD", 2000))

# Subsampling
KMEANS_MAX_ITER = int(os.getenv("HEATFLOW_KMEANS_MAX_ITER", 100))
KMEANS_TOL_FACTOR = float(os.getenv("HEATFLOW_KMEANS_TOL_FACTOR", 1e-6))
MINIBATCH_SIZE = int(os.getenv("HEATFLOW_MINIBATCH_SIZE", 1024))
MINIBATCH_ITERS = int(os.getenv("HEATFLOW_MINIBATCH_ITERS", 100))

# LAE solver
LAE_TOL = float(os.getenv("HEATFLOW_LAE_TOL", 1e-8))
LAE_MAX_ITER = int(os.getenv("HEATFLOW_LAE_MAX_ITER", 200))
LAE_RIDGE = float(os.getenv("HEATFLOW_LAE_RIDGE", 1e-10))

# Graph
ZERO_MASS_TOL = float(os.getenv("HEATFLOW_ZERO_MASS_TOL", 1e-14))

# Spectral solver
SVD_TOL = float(os.getenv("HEATFLOW_SVD_TOL", 1e-10))
DENSE_SVD_MAX_S = int(os.getenv("HEATFLOW_DENSE_SVD_MAX_S", 512))

# GP inference
JITTER = float(os.getenv("HEATFLOW_JITTER", 1e-10))
JITTER_DECADES = int(os.getenv("HEATFLOW_JITTER_DECADES", 3))
GH_NODES = int(os.getenv("HEATFLOW_GH_NODES", 20))
GH_MAX_NODES = int(os.getenv("HEATFLOW_GH_MAX_NODES", 100))
LAPLACE_TOL = float(os.getenv("HEATFLOW_LAPLACE_TOL", 1e-6))
LAPLACE_MAX_ITER = int(os.getenv("HEATFLOW_LAPLACE_MAX_ITER", 100))

# Hyperparameter search
SEARCH_SWEEPS = int(os.getenv("HEATFLOW_SEARCH_SWEEPS", 3))
SEARCH_TOL = float(os.getenv("HEATFLOW_SEARCH_TOL", 1e-3))

# Ensure log directory exists
if LOG_FILE and os.path.dirname(LOG_FILE):
    os.makedirs(os.path.dirname(LOG_FILE), exist_ok=True)
