"""
VLD Navigation - Utils Package

This package contains configuration, logging and error-handling utilities.
"""

from .common import (
    setup_logging, load_config, deep_merge, validate_config,
    derive_seed, dumps_canonical, DEFAULT_CONFIG
)
from .error_handling import VLDNavError, ErrorLogger, atomic_write, map_with_limit

__all__ = [
    'setup_logging', 'load_config', 'deep_merge', 'validate_config',
    'derive_seed', 'dumps_canonical', 'DEFAULT_CONFIG',
    'VLDNavError', 'ErrorLogger', 'atomic_write', 'map_with_limit'
]
