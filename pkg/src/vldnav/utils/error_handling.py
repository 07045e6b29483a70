"""
VLD Navigation - Error Handling and Resource Management Module

This module provides the exception hierarchy, structured error logging,
atomic file output and bounded concurrent execution used across vldnav.
"""

import os
import json
import logging
import datetime
import tempfile
import traceback
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterable, List, Optional


# Define a base exception class for the project
class VLDNavError(Exception):
    """Base exception class for all vldnav errors."""
    pass


class ConfigurationError(VLDNavError):
    """Raised when the configuration or command-line flags are invalid."""
    pass


class SchemaError(VLDNavError):
    """Raised when a world, task or trace document has the wrong schema."""
    pass


class GenerationInfeasibleError(VLDNavError):
    """Raised when world or task generation parameters cannot be satisfied."""
    pass


class NoDecoratedWindowError(GenerationInfeasibleError):
    """Raised when a world has no decorated window to deliver to."""
    pass


class PoseInsideGeometryError(VLDNavError):
    """Raised when a camera origin lies inside a building."""
    pass


class NotInViewError(VLDNavError):
    """Raised when a building does not appear in a camera view."""
    pass


class NoBuildingInViewError(NotInViewError):
    """Raised when the floor-count view contains no building."""
    pass


class CollisionError(VLDNavError):
    """Raised when a motion would bring the drone inside the safety radius of a building."""

    def __init__(self, message: str, actions: Optional[List[Any]] = None):
        super().__init__(message)
        self.actions = list(actions or [])  # actions executed before the collision, when known


class DivisionUndefinedError(VLDNavError):
    """Raised when the fine adjustment is asked to divide by zero visible floors."""
    pass


class FloorLocAbortError(VLDNavError):
    """Raised when the floor count backend refuses too many times in a row."""

    def __init__(self, message: str, queries_used: int = 0, actions: Optional[List[Any]] = None):
        super().__init__(message)
        self.queries_used = queries_used
        self.actions = list(actions or [])


class OvershootError(VLDNavError):
    """Raised when the ascent passes the building top before reaching the target floor."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class EmptyCropError(VLDNavError):
    """Raised when a crop box leaves no rows."""
    pass


class TransportError(VLDNavError):
    """Raised when the remote endpoint cannot be reached or answers with an HTTP error."""
    pass


class GrammarError(VLDNavError):
    """Raised when a remote reply violates the answer grammar."""
    pass


class MalformedTraceError(VLDNavError):
    """Raised when an episode trace is truncated or inconsistent."""
    pass


class DataInconsistencyError(VLDNavError):
    """Raised when metric inputs contradict each other."""
    pass


class ErrorLogger:
    """Structured error logging: one JSON document per failure."""

    def __init__(self, log_file: Optional[str] = None):
        self.logger = logging.getLogger("vldnav.errors")
        if log_file and not any(isinstance(h, logging.FileHandler) for h in self.logger.handlers):
            os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
            file_handler = logging.FileHandler(log_file)
            file_handler.setLevel(logging.ERROR)
            file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
            self.logger.addHandler(file_handler)

    def log_error(self, error: BaseException, context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """Log an error with traceback and context, returning the structured record."""
        error_info = {
            "timestamp": datetime.datetime.now().isoformat(),
            "error_type": type(error).__name__,
            "error_message": str(error),
            "traceback": "".join(traceback.format_exception(type(error), error, error.__traceback__)),
            "context": context or {}
        }
        self.logger.error(json.dumps(error_info, default=str))
        return error_info


@contextmanager
def atomic_write(path: str, mode: str = 'w', encoding: Optional[str] = 'utf-8'):
    """Write to a temporary file next to path and move it into place on success."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(prefix=".vldnav_", dir=directory)
    try:
        with os.fdopen(fd, mode, encoding=encoding if 'b' not in mode else None) as handle:
            yield handle
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temp_path, path)
    except BaseException:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise


def map_with_limit(func: Callable[[Any], Any], items: Iterable[Any], max_workers: int = 1,
                   on_done: Optional[Callable[[], None]] = None) -> List[Any]:
    """
    Apply func to every item with at most max_workers threads.

    Results keep the input order; the first exception is re-raised after all
    submitted work has finished.
    """
    items = list(items)
    if max_workers <= 1:
        results = []
        for item in items:
            results.append(func(item))
            if on_done:
                on_done()
        return results

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(func, item) for item in items]
        if on_done:
            for future in futures:
                future.add_done_callback(lambda _f: on_done())
        return [future.result() for future in futures]
