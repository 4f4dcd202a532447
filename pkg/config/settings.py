"""
Configuration Module for DIOT Lab

Centralizes process-level configuration including:
- Environment selection (development / production / testing)
- Logging level and optional log file
- Worker pool size for trial execution
- Default seed and report directory
- Simulator limits and numerical tolerances

Experiment parameters (n, ℓ, γ, ...) live in config/protocol.py.

Author: DIOT Lab Development Team
"""

import os

# Load environment variables
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass


class Config:
    """Base configuration class"""

    # Environment
    DIOT_ENV = os.environ.get('DIOT_ENV', 'development')
    IS_PRODUCTION = DIOT_ENV == 'production'
    DEBUG = not IS_PRODUCTION

    # Logging
    LOG_LEVEL = os.environ.get('LOG_LEVEL', '')
    LOG_FILE = os.environ.get('LOG_FILE', '')

    # Execution
    WORKERS = int(os.environ.get('WORKERS', '1'))
    DEFAULT_SEED = os.environ.get('DEFAULT_SEED', '')
    REPORT_DIR = os.environ.get('REPORT_DIR', 'reports')

    # Simulator
    MAX_QUBITS = int(os.environ.get('MAX_QUBITS', '12'))
    FIDELITY_TOLERANCE = float(os.environ.get('FIDELITY_TOLERANCE', '1e-9'))
    ALGEBRA_TOLERANCE = float(os.environ.get('ALGEBRA_TOLERANCE', '1e-10'))

    def default_seed(self):
        """Seed used when neither the CLI nor the config document supplies one."""
        return int(self.DEFAULT_SEED) if self.DEFAULT_SEED else 0

    def get_report_dir(self):
        """Get the report directory, creating it on first use."""
        try:
            os.makedirs(self.REPORT_DIR, exist_ok=True)
        except OSError:
            pass
        return self.REPORT_DIR


class DevelopmentConfig(Config):
    """Development configuration"""
    DEBUG = True


class ProductionConfig(Config):
    """Production configuration"""
    DEBUG = False

    def __init__(self):
        if not self.DEFAULT_SEED:
            raise ValueError("DEFAULT_SEED must be set in production environment")


class TestingConfig(Config):
    """Testing configuration"""
    TESTING = True
    DEBUG = True
    WORKERS = 1


# Configuration factory
config_map = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def get_config():
    """Get configuration based on environment"""
    env = os.environ.get('DIOT_ENV', 'development')
    return config_map.get(env, config_map['default'])()


# Commonly used values exposed directly
MAX_QUBITS = Config.MAX_QUBITS
FIDELITY_TOLERANCE = Config.FIDELITY_TOLERANCE
ALGEBRA_TOLERANCE = Config.ALGEBRA_TOLERANCE
