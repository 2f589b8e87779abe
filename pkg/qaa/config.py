import os
import json

from dotenv import load_dotenv

load_dotenv()

VERSION = "0.1.0"


def _env_int(name, default):
    return int(float(os.environ.get(name, default)))


def _env_float(name, default):
    return float(os.environ.get(name, default))


def _env_bool(name, default):
    return os.environ.get(name, str(default)).lower() in ("1", "true", "yes")


class QaaConfig:
    """
    Centralized configuration for the QAA toolkit.
    Reads from environment variables or defaults, then applies the JSON override file.
    """

    # Output
    OUTPUT_DIR = os.environ.get("QAA_OUTPUT_DIR", os.path.join(os.getcwd(), "qaa_runs"))
    LOG_LEVEL = os.environ.get("QAA_LOG_LEVEL", "INFO")

    # Resources
    N_JOBS = _env_int("QAA_JOBS", 1)
    MEMORY_BUDGET_BYTES = _env_int("QAA_MEMORY_BUDGET", 8 * 1024 ** 3)

    # Integrator
    INTEGRATOR = os.environ.get("QAA_INTEGRATOR", "magnus4")
    BASE_STEP = _env_float("QAA_BASE_STEP", 0.05)
    MIN_STEPS = _env_int("QAA_MIN_STEPS", 2000)
    TOLERANCE = _env_float("QAA_TOLERANCE", 1e-6)
    MAX_STEPS = _env_int("QAA_MAX_STEPS", 10_000_000)
    VERIFY_CONVERGENCE = _env_bool("QAA_VERIFY_CONVERGENCE", False)
    KRYLOV_DIM = _env_int("QAA_KRYLOV_DIM", 24)
    KRYLOV_TOL = _env_float("QAA_KRYLOV_TOL", 1e-13)
    TRAJECTORY_POINTS = _env_int("QAA_TRAJECTORY_POINTS", 201)

    # Spectrum
    GRID_POINTS = _env_int("QAA_GRID_POINTS", 201)
    REFINE_ITERS = _env_int("QAA_REFINE_ITERS", 40)
    EIG_TOL = _env_float("QAA_EIG_TOL", 1e-8)
    DENSE_SPECTRUM_DIM = _env_int("QAA_DENSE_DIM", 16)

    # Mean field and mining
    MF_THRESHOLD = _env_float("QAA_MF_THRESHOLD", 0.5)
    MF_STEPS = _env_int("QAA_MF_STEPS", 4000)
    T_REF = _env_float("QAA_T_REF", 100.0)
    HARDNESS_CUTOFF = _env_float("QAA_HARDNESS_CUTOFF", 1e-4)

    # Path change
    STOQUASTIC_MAX_RETRIES = _env_int("QAA_STOQ_RETRIES", 1_000_000)

    @classmethod
    def load_overrides(cls, config_path=None):
        """Apply a JSON override file (keys are case-insensitive attribute names)."""
        config_path = config_path or os.environ.get(
            "QAA_CONFIG_FILE", os.path.join(os.getcwd(), "qaa_config.json"))
        if not os.path.exists(config_path):
            return
        try:
            with open(config_path, "r") as f:
                overrides = json.load(f)
        except (OSError, ValueError):
            return
        for key, value in overrides.items():
            if hasattr(cls, key.upper()):
                setattr(cls, key.upper(), value)

    @classmethod
    def snapshot(cls):
        """Plain dict of every configuration key, for run manifests."""
        return {k: getattr(cls, k) for k in dir(cls) if k.isupper()}

    @classmethod
    def output_path(cls, *parts):
        path = os.path.join(cls.OUTPUT_DIR, *parts)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        return path


QaaConfig.load_overrides()
