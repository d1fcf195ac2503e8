"""
onehomog Runtime Configuration

Owns the settings read from the environment (worker cap, log location).
Scenario parameters live in schema.py.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


class OneHomogConfig:
    """
    Runtime configuration for the laboratory.
    Reads all settings from environment variables at instantiation time.
    """

    def __init__(self) -> None:
        self.threads_raw: str = os.getenv("ONEHOMOG_THREADS", "0")
        self.log_level: str = os.getenv("ONEHOMOG_LOG_LEVEL", "DEBUG").upper()
        log_dir = os.getenv("ONEHOMOG_LOG_DIR")
        self.log_dir: Path | None = Path(log_dir) if log_dir else None

        self._validate()

    def _validate(self) -> None:
        invalid = []
        try:
            self.requested_threads: int = int(self.threads_raw)
            if self.requested_threads < 0:
                invalid.append("ONEHOMOG_THREADS")
        except ValueError:
            self.requested_threads = 0
            invalid.append("ONEHOMOG_THREADS")

        if self.log_level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            invalid.append("ONEHOMOG_LOG_LEVEL")

        if invalid:
            raise ValueError(f"Invalid environment variables: {', '.join(invalid)}")

    @property
    def threads(self) -> int:
        """Worker cap for battery evaluation (0 means one per CPU)."""
        if self.requested_threads == 0:
            return os.cpu_count() or 1
        return self.requested_threads
