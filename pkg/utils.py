"""
Utility functions for the FBCSP decoder command line.
Contains logging and configuration helpers.
"""

import configparser
import copy
import sys
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path

# Global loggers
success_logger = None
error_logger = None

DEFAULT_CONFIG_FILE = "config.ini"

DEFAULT_CONFIG = {
    "preprocessing": {
        "target_fs_hz": 500.0,
        "highpass_hz": 0.5,
        "highpass_order": 4,
        "zero_phase": False,
    },
    "cleaning": {
        "noisy_k": 5.0,
        "threshold_uv": 600.0,
        "pre_ms": 500.0,
        "criterion": "any_channel",
        "exclude_channels": [],
    },
    "filter_bank": {
        "low_edge": 0.5,
        "split": 30.0,
        "high_edge": 144.0,
        "low_bw": 2.0,
        "high_bw": 6.0,
        "order": 4,
    },
    "decoding": {
        "k_folds": 10,
        "m_filters": 3,
        "shrinkage": "auto",
        "fold_scheme": "stratified",
        "experiment": "exp1",
    },
    "stats": {
        "n_permutations": 100000,
        "replace": True,
        "raw_fraction": False,
    },
    "runtime": {
        "seed": 0,
        "jobs": -1,
    },
    "output": {
        "path": "output_files",
    },
    "logging": {
        "path": "logs",
        "success_file": "success.log",
        "error_file": "error.log",
        "max_bytes": 10485760,
        "backup_count": 5,
    },
}


def setup_logging(log_config):
    """
    Setup logging with separate success and error log files.

    Args:
        log_config: Dictionary with logging configuration.
    """
    global success_logger, error_logger

    try:
        log_dir = Path(log_config.get("path", "logs"))
        success_file = log_config.get("success_file", "success.log")
        error_file = log_config.get("error_file", "error.log")
        max_bytes = log_config.get("max_bytes", 10485760)
        backup_count = log_config.get("backup_count", 5)

        log_dir.mkdir(parents=True, exist_ok=True)

        log_format = logging.Formatter(
            '%(asctime)s | %(levelname)s | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        success_logger = logging.getLogger('success')
        success_logger.setLevel(logging.INFO)
        success_logger.handlers = []
        success_handler = RotatingFileHandler(
            log_dir / success_file,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding='utf-8'
        )
        success_handler.setFormatter(log_format)
        success_logger.addHandler(success_handler)

        error_logger = logging.getLogger('error')
        error_logger.setLevel(logging.ERROR)
        error_logger.handlers = []
        error_handler = RotatingFileHandler(
            log_dir / error_file,
            maxBytes=max_bytes,
            backupCount=backup_count,
            encoding='utf-8'
        )
        error_handler.setFormatter(log_format)
        error_logger.addHandler(error_handler)

        # Also log errors to console
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(log_format)
        error_logger.addHandler(console_handler)
    except Exception as e:
        print(f"Failed to setup logging: {str(e)}", file=sys.stderr)


def close_logging():
    """Detach and close every handler (tests reuse the loggers)."""
    global success_logger, error_logger
    for logger in (success_logger, error_logger):
        if logger:
            for handler in logger.handlers:
                handler.close()
            logger.handlers = []
    success_logger = None
    error_logger = None


def log_success(message, **kwargs):
    """Log a success message."""
    if success_logger:
        extra_info = ' | '.join(f'{k}={v}' for k, v in kwargs.items())
        full_message = f"{message} | {extra_info}" if extra_info else message
        success_logger.info(full_message)


def log_error(message, **kwargs):
    """Log an error message."""
    if error_logger:
        extra_info = ' | '.join(f'{k}={v}' for k, v in kwargs.items())
        full_message = f"{message} | {extra_info}" if extra_info else message
        error_logger.error(full_message)


def _read_value(parser, section, key, default):
    if isinstance(default, bool):
        return parser.getboolean(section, key, fallback=default)
    if isinstance(default, int):
        return parser.getint(section, key, fallback=default)
    if isinstance(default, float):
        return parser.getfloat(section, key, fallback=default)
    if isinstance(default, list):
        raw = parser.get(section, key, fallback=None)
        if raw is None:
            return default
        return [item.strip() for item in raw.split(',') if item.strip()]
    return parser.get(section, key, fallback=default)


def load_config(config_file=None):
    """
    Load configuration from an INI file on top of the built-in defaults.

    A missing file is logged and yields the defaults. Malformed values
    raise ValueError.
    """
    config_path = Path(config_file or DEFAULT_CONFIG_FILE)
    config = copy.deepcopy(DEFAULT_CONFIG)

    if not config_path.exists():
        log_error("Config file not found, using defaults", config_file=str(config_path))
        return config

    parser = configparser.ConfigParser()
    try:
        parser.read(config_path, encoding='utf-8')
    except configparser.Error as e:
        raise ValueError(f"Invalid config file {config_path}: {e}") from e

    for section in parser.sections():
        if section not in config:
            log_error("Unknown config section ignored", config_file=str(config_path), section=section)
            continue
        for key, default in config[section].items():
            config[section][key] = _read_value(parser, section, key, default)

    log_success("Configuration loaded", config_file=str(config_path))
    return config
