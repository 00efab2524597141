import logging
import os

from dotenv import load_dotenv

from .errors import ConfigError

logger = logging.getLogger(__name__)

load_dotenv()

# Qp workloads with nbar <= 2 are faithful at this cutoff; raise it with nbar.
FALLBACK_DIM = 80
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def get_default_dim() -> int:
    """Fock cutoff used when no --dim is given (env OQO_DEFAULT_DIM)."""
    raw = os.getenv("OQO_DEFAULT_DIM")
    if raw is None or raw.strip() == "":
        return FALLBACK_DIM
    try:
        dim = int(raw)
    except ValueError:
        raise ConfigError(f"OQO_DEFAULT_DIM must be an integer, got {raw!r}")
    if dim < 2:
        raise ConfigError(f"OQO_DEFAULT_DIM must be >= 2, got {dim}")
    logger.debug(f"Default dimension from environment: {dim}")
    return dim


def get_log_level() -> str:
    """Logging level name from OQO_LOG_LEVEL, WARNING when unset."""
    level = os.getenv("OQO_LOG_LEVEL", "").strip().upper() or "WARNING"
    if level not in LOG_LEVELS:
        raise ConfigError(f"OQO_LOG_LEVEL must be one of {LOG_LEVELS}, got {level!r}")
    return level
