import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

OUTPUT_DIR = os.getenv("WARPLAB_OUTPUT_DIR", "runs")
DEFAULT_SEED = int(os.getenv("WARPLAB_SEED", "20240601"))
FD_STEP = float(os.getenv("WARPLAB_FD_STEP", "1e-5"))
LOG_LEVEL = os.getenv("WARPLAB_LOG_LEVEL", "INFO").upper()
MAX_WORKERS = int(os.getenv("WARPLAB_MAX_WORKERS", "4"))
