"""
Logging configuration for the pipeline.

Library modules log through `logging.getLogger(__name__)`; this module installs
a rich handler on the root logger once, at the level set by INSPHERE_LOG_LEVEL.
"""

import logging
import os
from typing import Optional

from dotenv import load_dotenv
from rich.logging import RichHandler

load_dotenv()


class ObservabilityConfig:
    """Configuration for logging and run tracking."""

    LOG_LEVEL = os.getenv("INSPHERE_LOG_LEVEL", "INFO").upper()
    RUN_TRACKING_ENABLED = os.getenv("INSPHERE_RUN_TRACKING", "true").lower() == "true"
    SHOW_PATHS = os.getenv("INSPHERE_LOG_PATHS", "false").lower() == "true"

    _configured = False

    @classmethod
    def setup_logging(cls, level: Optional[str] = None) -> None:
        """
        Install the rich log handler on the root logger.

        Calling this more than once only updates the level.

        Args:
            level: Log level name; defaults to INSPHERE_LOG_LEVEL
        """
        level_name = (level or cls.LOG_LEVEL).upper()
        root = logging.getLogger()
        root.setLevel(level_name)

        if cls._configured:
            return

        handler = RichHandler(
            show_path=cls.SHOW_PATHS,
            rich_tracebacks=True,
            markup=False,
        )
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        root.addHandler(handler)
        cls._configured = True
