# core/settings.py
from pathlib import Path
import os
import logging
from dotenv import load_dotenv

load_dotenv()  # reads .env if present

BASE_DIR = Path(__file__).resolve().parent.parent

# --- Basic project settings ---
SECRET_KEY = os.getenv("SECRET_KEY", "dev-insecure-secret-key")
DEBUG = os.getenv("DEBUG", "1") == "1"


def _flag(env_name: str, default: str = "0") -> bool:
    return os.getenv(env_name, default).strip().lower() in ("1", "true", "yes", "on")


ALLOWED_HOSTS: list[str] = []

# --- Installed apps ---
INSTALLED_APPS = [
    # Third-party
    "rest_framework",

    # Local apps
    "mcnfli",
]

# Solver runs are file-in / file-out; nothing is persisted.
DATABASES: dict = {}

# --- I18N / TZ ---
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# --- Solver ---
MCNFLI = {
    "TOLERANCE": float(os.getenv("MCNFLI_TOLERANCE", "1e-9")),
    "DEGENERATE_PIVOT_LIMIT": int(os.getenv("MCNFLI_DEGENERATE_PIVOT_LIMIT", "50")),
    # iteration cap = ITERATION_FACTOR * (m + p) * n
    "ITERATION_FACTOR": int(os.getenv("MCNFLI_ITERATION_FACTOR", "10")),
    "DEFAULT_RULE": os.getenv("MCNFLI_DEFAULT_RULE", "dantzig"),
    "USE_DHAT": _flag("MCNFLI_USE_DHAT"),
    "MAX_ATTEMPTS": int(os.getenv("MCNFLI_MAX_ATTEMPTS", "1000")),
    "BRUTE_FORCE_MAX_P": int(os.getenv("MCNFLI_BRUTE_FORCE_MAX_P", "20")),
    "BNB_NODE_LIMIT": int(os.getenv("MCNFLI_BNB_NODE_LIMIT", "100000")),
    "INTERDEP_RESAMPLES": int(os.getenv("MCNFLI_INTERDEP_RESAMPLES", "100")),
    "NETWORK_RESAMPLES": int(os.getenv("MCNFLI_NETWORK_RESAMPLES", "10")),
    "BENCH_WORKERS": int(os.getenv("MCNFLI_BENCH_WORKERS", "1")),
    "DEBUG_CHECKS": _flag("MCNFLI_DEBUG_CHECKS", "1" if DEBUG else "0"),
}

# --- Observability ---------------------------------------------------------

SENTRY_DSN = os.getenv("SENTRY_DSN")
if SENTRY_DSN:
    try:
        import sentry_sdk
        from sentry_sdk.integrations.logging import LoggingIntegration

        sentry_logging = LoggingIntegration(
            level=logging.INFO,
            event_level=logging.ERROR,
        )
        sentry_sdk.init(
            dsn=SENTRY_DSN,
            integrations=[sentry_logging],
            traces_sample_rate=float(os.getenv("SENTRY_TRACES_SAMPLE_RATE", "0.0")),
            environment=os.getenv("SENTRY_ENVIRONMENT"),
        )
    except Exception as exc:  # pragma: no cover - protect boot
        logging.getLogger("django").warning("Sentry init failed: %s", exc)

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "%(asctime)s %(levelname)s [%(name)s] %(message)s",
        }
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        }
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": os.getenv("DJANGO_LOG_LEVEL", "INFO"),
        },
        "mcnfli": {
            "handlers": ["console"],
            "level": os.getenv("MCNFLI_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
        "mcnfli.harness": {
            "handlers": ["console"],
            "level": os.getenv("BENCH_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}
