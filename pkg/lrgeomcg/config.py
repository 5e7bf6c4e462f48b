"""
Configuration settings for lrgeomcg
"""

import os
from dotenv import load_dotenv

load_dotenv()


def _env_flag(name: str, default: str) -> bool:
    return os.environ.get(name, default).lower() in ('1', 'true', 'yes', 'on')


class Config:
    """Base configuration"""
    PROFILE = os.environ.get('LRGEOMCG_PROFILE', 'desk')
    LOG_LEVEL = os.environ.get('LRGEOMCG_LOG_LEVEL', 'INFO').upper()

    # Execution
    WORKERS = int(os.environ.get('LRGEOMCG_WORKERS', '1'))
    SAMPLING_RETRIES = int(os.environ.get('LRGEOMCG_SAMPLING_RETRIES', '100'))
    RECORD_TIMING = _env_flag('LRGEOMCG_RECORD_TIMING', 'false')

    # Output
    OUTPUT_DIR = os.environ.get('LRGEOMCG_OUTPUT_DIR', 'results')

    # Problem defaults (random low-rank instances)
    DEFAULT_SIZE = 1000
    DEFAULT_RANK = 40
    DEFAULT_OVERSAMPLING = 3.0

    # Decaying-spectrum defaults
    BIVARIATE_SIZE = 200
    BIVARIATE_SIGMA = 1.0
    BIVARIATE_REFERENCE_RANK = 10
    BIVARIATE_OVERSAMPLING = 8.0


class DeskConfig(Config):
    """Desk-scale configuration: sizes shrunk, OS and k/n ratios kept"""
    DEFAULT_SIZE = 1000
    DEFAULT_RANK = 40


class FullConfig(Config):
    """Full-scale configuration: n = 8000 problems"""
    DEFAULT_SIZE = 8000
    DEFAULT_RANK = 40
    BIVARIATE_SIZE = 8000
    BIVARIATE_REFERENCE_RANK = 20


config = {
    'desk': DeskConfig,
    'full': FullConfig,
    'default': DeskConfig
}


def get_config():
    """Return the configuration class selected by LRGEOMCG_PROFILE"""
    return config.get(Config.PROFILE, config['default'])
