"""Configuration with defaults and environment variable support."""

import os


def _get_env_bool(key: str, default: bool) -> bool:
    """Read a boolean environment variable ("true"/"false")."""
    value = os.getenv(key)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


class Config:
    """Configuration class with default values and environment variable overrides.

    All environment variables use the ABC_TORUS_ prefix.
    Example: ABC_TORUS_TAU_MAP=1e-7 ABC_TORUS_JOBS=4 python run_experiment.py --config configs/variant_a.yml
    """

    def __init__(self) -> None:
        """Initialize configuration from environment variables with defaults."""
        # Tolerances
        self.tau_geo = float(os.getenv("ABC_TORUS_TAU_GEO", "1e-9"))
        self.tau_map = float(os.getenv("ABC_TORUS_TAU_MAP", "1e-8"))
        self.tau_jac = float(os.getenv("ABC_TORUS_TAU_JAC", "1e-6"))

        # Sampling budgets
        self.seed = int(os.getenv("ABC_TORUS_SEED", "0"))
        self.mc_samples = int(os.getenv("ABC_TORUS_MC_SAMPLES", str(2**20)))
        self.full_period_cap = int(os.getenv("ABC_TORUS_FULL_PERIOD_CAP", "10000000"))
        self.stratified_samples = int(os.getenv("ABC_TORUS_STRATIFIED_SAMPLES", "1000000"))
        self.chunk_size = int(os.getenv("ABC_TORUS_CHUNK_SIZE", str(2**18)))

        # Runner settings
        self.jobs = int(os.getenv("ABC_TORUS_JOBS", "1"))
        self.output_dir = os.getenv("ABC_TORUS_OUTPUT_DIR", "results")
        self.verbose = _get_env_bool("ABC_TORUS_VERBOSE", False)
        self.progress = _get_env_bool("ABC_TORUS_PROGRESS", True)


# Default configuration instance for convenient importing
config = Config()
