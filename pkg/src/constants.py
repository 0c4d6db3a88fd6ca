import os

from dotenv import load_dotenv

load_dotenv(os.getenv("ENV_FILE"), override=True)

# General
PRODUCT = os.getenv("PRODUCT", "cqed-sim")
VERSION = os.environ.get("VERSION", "0")
ENV = os.getenv("ENV", "dev")
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = os.getenv("LOG_FORMAT", "text")

BASE_PATH = os.path.dirname(os.path.realpath(__file__))
# Overrides the presets shipped inside the package
PRESETS_DIR = os.getenv("CQED_SIM_PRESETS_DIR")

# Worker threads for grid evaluations; 0 means "use all available cores"
CQED_SIM_THREADS = int(os.getenv("CQED_SIM_THREADS", "0") or 0)
