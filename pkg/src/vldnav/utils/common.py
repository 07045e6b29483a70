"""
VLD Navigation - Common Utilities

This module contains logging setup, the default configuration, configuration
loading and seed derivation shared by every vldnav component.
"""

import os
import sys
import copy
import json
import hashlib
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Dict, Any, Optional

import yaml
from dotenv import load_dotenv

from vldnav.utils.error_handling import ConfigurationError


# Configure logging
def setup_logging(debug: bool = False, log_dir: str = 'logs'):
    """Configure the vldnav logger with a rotating file handler and a console handler."""
    log_level = logging.DEBUG if debug else logging.INFO

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.WARNING)

    vld_logger = logging.getLogger('vldnav')
    vld_logger.setLevel(log_level)

    if not vld_logger.handlers:
        formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        try:
            os.makedirs(log_dir, exist_ok=True)
            file_handler = RotatingFileHandler(
                os.path.join(log_dir, 'vldnav.log'),
                maxBytes=10*1024*1024,  # 10 MB
                backupCount=5
            )
            file_handler.setFormatter(formatter)
            vld_logger.addHandler(file_handler)
        except OSError as e:
            print(f"WARNING: file logging disabled: {e}", file=sys.stderr)

        # Console goes to stderr; stdout carries reports
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(formatter)
        vld_logger.addHandler(console_handler)

    # Silence noisy loggers
    for logger_name in ['urllib3', 'shapely']:
        logging.getLogger(logger_name).setLevel(logging.ERROR)

    return vld_logger


ENV_REMOTE_URL = 'VLD_REMOTE_URL'
ENV_REMOTE_TOKEN = 'VLD_REMOTE_TOKEN'

VALID_BACKENDS = ('oracle', 'remote')
VALID_VIEWPOINTS = ('ours', 'random', 'default')
VALID_CHOICES = ('backend', 'center-only')
VALID_FLOORLOC = ('ours', 'direct-count')


# Default configuration
DEFAULT_CONFIG = {
    'world': {
        'num_buildings': 1,           # Buildings per generated world
        'vertices': [4, 8],           # Footprint vertex count range (3-8 allowed)
        'radius': [11.0, 16.0],       # Footprint circumradius range (m)
        'floors': [3, 10],            # Floor count range per building
        'floor_height': [2.8, 3.6],   # Uniform floor height range (m)
        'window_spacing': 3.0,        # Centre-to-centre window spacing along a facade (m)
        'window_width': 1.2,          # Window extent along the facade (m)
        'window_height': 1.4,         # Window extent vertically (m)
        'facade_margin': 1.5,         # Clear margin at each facade end (m)
        'min_facade_length': 6.0,     # Shortest admissible facade (m)
        'windows_per_facade': 8,      # Upper bound on windows per facade per floor
        'decoration_density': 0.12,   # Probability that a window carries an object
        'min_gap': 40.0,              # Minimum gap between footprints (m)
        'bounds_margin': 60.0,        # Free space around the outermost footprint (m)
        'max_attempts': 200           # Placement attempts before generation is infeasible
    },
    'camera': {
        'hfov': 90.0,                 # Horizontal field of view (degrees)
        'vfov': 90.0,                 # Vertical field of view (degrees)
        'width': 128,                 # Image width (pixels)
        'height': 128,                # Image height (pixels)
        'max_range': 80.0             # Depth sentinel for no hit (m)
    },
    'mission': {
        'step_budget': 30,            # Exploration steps per episode
        'success_radius': 3.0,        # Radius around the standoff point (m)
        'standoff': 1.5,              # Delivery standoff from the window centre (m)
        'safety_radius': 0.5,         # Collision inflation radius (m)
        'start_distance': [8.0, 12.0]  # Start distance from the facade (m)
    },
    'floorloc': {
        'method': 'ours',             # 'ours' or 'direct-count'
        'max_refusals': 3,            # Consecutive refusals before abort
        'fail_threshold': 7.0,        # FL failure threshold (m)
        'max_waypoints': 20,          # Hard bound on ascent waypoints
        'max_retreats': 10            # Direct-count retreat steps
    },
    'explore': {
        'viewpoint': 'ours',          # 'ours', 'random' or 'default'
        'choice': 'backend',          # 'backend' or 'center-only'
        'slices': 20,                 # Slice count x
        'delta': 5.0,                 # Depth-jump threshold (m)
        'd_max': 40.0,                # Far-depth limit before escalation (m)
        'overflow_fraction': 0.2,     # Share of right slices allowed beyond d_max
        'max_escalations': 2,         # d_max doublings before falling back
        'l_max': 10.0,                # Maximum translation per step (m)
        'deadlock_threshold': 1.0,    # Below this the drone rotates instead (m)
        'corridor_margin': 0.25,      # Extra clearance over the safety radius for translates (m)
        'approach_clearance': 0.75,   # Corridor clearance checked before approach legs (m)
        'replan_distance': 20.0,      # Approach plans further than this fly one leg and re-plan (m)
        'align_tolerance_deg': 2.0,   # Approach yaw tolerance (degrees)
        'align_tolerance_m': 0.3      # Approach altitude tolerance (m)
    },
    'perception': {
        'backend': 'oracle',          # 'oracle' or 'remote'
        'noise': 'none',              # Noise preset name
        'occlusion_threshold': 0.5,   # Recognition requires less occlusion than this
        'max_view_angle_deg': 85.0,   # Widest readable angle off the facade normal (degrees)
        'facade_sample_spacing': 1.0  # Exploration-memory sample spacing (m)
    },
    'remote': {
        'url': None,                  # Chat-completion endpoint (VLD_REMOTE_URL)
        'token': None,                # Bearer token (VLD_REMOTE_TOKEN)
        'model': 'qwen2-vl-7b-instruct',  # Model name sent with each request
        'timeout': 30,                # Request timeout (seconds)
        'retries': 2,                 # Re-asks after a grammar violation
        'transport_retries': 1,       # Re-sends after a transport failure
        'prompt_version': 'v1'        # Prompt asset version
    },
    'tasks': {
        'worlds': 5,                  # Worlds written by gen
        'count': 50,                  # Tasks written by gen
        'mix': {'easy': 0.4, 'moderate': 0.4, 'hard': 0.2}  # Requested difficulty mix
    },
    'output': {
        'dir': 'out',                 # Output directory
        'jobs': 1                     # Concurrent episodes
    },
    'seed': 0,                        # Root seed
    'debug': False                    # Enable debug logging
}


def environment_overrides() -> Dict[str, Any]:
    """Read endpoint settings from the environment (and a .env file if present)."""
    load_dotenv(override=False)
    remote = {}
    if os.environ.get(ENV_REMOTE_URL):
        remote['url'] = os.environ[ENV_REMOTE_URL]
    if os.environ.get(ENV_REMOTE_TOKEN):
        remote['token'] = os.environ[ENV_REMOTE_TOKEN]
    return {'remote': remote} if remote else {}


def load_config(config_file: Optional[str] = None, config_override: Optional[Dict] = None) -> Dict[str, Any]:
    """
    Load configuration with precedence flags > config file > environment > defaults.

    Args:
        config_file: Path to a YAML config file
        config_override: Dictionary of flag overrides

    Returns:
        Merged, validated configuration dictionary
    """
    logger = logging.getLogger('vldnav.config')
    config = copy.deepcopy(DEFAULT_CONFIG)

    env = environment_overrides()
    if env:
        config = deep_merge(config, env)
        logger.debug("Applied environment overrides")

    if config_file:
        path = Path(config_file)
        if not path.exists():
            raise ConfigurationError(f"Config file not found: {config_file}")
        try:
            with open(path, 'r') as f:
                loaded = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in {config_file}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigurationError(f"Config file {config_file} must contain a mapping")
        config = deep_merge(config, loaded)
        logger.info(f"Loaded configuration from {config_file}")

    if config_override:
        config = deep_merge(config, config_override)
        logger.debug("Applied configuration overrides")

    validate_config(config)
    return config


def deep_merge(base, override):
    """
    Recursively merge dictionaries.

    Args:
        base: Base dictionary
        override: Override dictionary

    Returns:
        Merged dictionary (inputs are not modified)
    """
    if isinstance(base, dict) and isinstance(override, dict):
        result = base.copy()
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = deep_merge(result[key], value)
            else:
                result[key] = value
        return result
    return override


def validate_config(config: Dict[str, Any]):
    """Raise ConfigurationError unless the run configuration is usable."""
    perception = config['perception']
    explore = config['explore']
    if perception['backend'] not in VALID_BACKENDS:
        raise ConfigurationError(f"Unknown backend '{perception['backend']}', expected one of {VALID_BACKENDS}")
    if explore['viewpoint'] not in VALID_VIEWPOINTS:
        raise ConfigurationError(f"Unknown viewpoint strategy '{explore['viewpoint']}'")
    if explore['choice'] not in VALID_CHOICES:
        raise ConfigurationError(f"Unknown choice mode '{explore['choice']}'")
    if config['floorloc']['method'] not in VALID_FLOORLOC:
        raise ConfigurationError(f"Unknown floor localization method '{config['floorloc']['method']}'")
    if perception['backend'] == 'remote' and perception.get('noise', 'none') != 'none':
        raise ConfigurationError("Noise profiles apply to the oracle backend only")

    positive = [
        ('camera', 'hfov'), ('camera', 'vfov'), ('camera', 'max_range'),
        ('mission', 'success_radius'), ('mission', 'standoff'), ('mission', 'safety_radius'),
        ('explore', 'delta'), ('explore', 'd_max'), ('explore', 'l_max'),
        ('explore', 'slices'), ('explore', 'deadlock_threshold'), ('explore', 'replan_distance'),
        ('explore', 'approach_clearance'), ('perception', 'max_view_angle_deg'),
        ('floorloc', 'fail_threshold'), ('floorloc', 'max_refusals'),
    ]
    for section, key in positive:
        value = config[section][key]
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise ConfigurationError(f"{section}.{key} must be positive, got {value!r}")
    if config['mission']['step_budget'] < 0:
        raise ConfigurationError("mission.step_budget must be non-negative")
    if not 0.0 <= explore['overflow_fraction'] <= 1.0:
        raise ConfigurationError("explore.overflow_fraction must lie in [0, 1]")
    if explore['corridor_margin'] < 0:
        raise ConfigurationError("explore.corridor_margin must be non-negative")
    if perception['max_view_angle_deg'] > 90.0:
        raise ConfigurationError("perception.max_view_angle_deg must not exceed 90 degrees")
    if config['camera']['width'] < 16 or config['camera']['height'] < 16:
        raise ConfigurationError("camera width and height must be at least 16 pixels")
    if config['camera']['width'] < explore['slices']:
        raise ConfigurationError("camera width must be at least the slice count")
    if config['output']['jobs'] < 1:
        raise ConfigurationError("output.jobs must be at least 1")


def derive_seed(root: int, tag: str) -> int:
    """Split the root seed per subsystem: root XOR a 64-bit digest of the tag."""
    digest = hashlib.blake2b(tag.encode('utf-8'), digest_size=8).digest()
    return (int(root) ^ int.from_bytes(digest, 'big')) & 0xFFFFFFFFFFFFFFFF


def dumps_canonical(data: Any, indent: Optional[int] = 2) -> str:
    """JSON text with sorted keys; identical inputs give identical bytes."""
    return json.dumps(data, indent=indent, sort_keys=True, allow_nan=False)
