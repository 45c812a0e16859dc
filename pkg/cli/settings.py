"""
Settings
Environment configuration loaded from the process environment and .env
"""

import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

from data.fetch import DEFAULT_MNIST_URL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    data_dir: str
    log_level: str
    mnist_url: str


def load_settings(dotenv_path=None):
    """
    Read SALGRAD_* variables, after merging an optional .env file

    Variables already present in the environment win over .env entries.
    """
    load_dotenv(dotenv_path=dotenv_path, override=False)
    return Settings(
        data_dir=os.getenv('SALGRAD_DATA_DIR', 'data'),
        log_level=os.getenv('SALGRAD_LOG_LEVEL', 'INFO').upper(),
        mnist_url=os.getenv('SALGRAD_MNIST_URL', DEFAULT_MNIST_URL),
    )
