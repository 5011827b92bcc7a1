"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 17, 2026
"""

from typing import Optional

# Exit codes for the command-line surface; 2 is click's own usage error
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_VERIFY = 5
EXIT_DOMAIN = 6


class CalibkitError(ValueError):
    """Base class for every error raised on bad input."""

    exit_code = EXIT_UNEXPECTED


class DomainError(CalibkitError):
    """Input outside the mathematical domain (non-finite logits, T <= 0, zero probabilities)."""

    exit_code = EXIT_DOMAIN


class ContractError(CalibkitError):
    """Input that violates a type contract, e.g. a probability vector off the simplex."""

    exit_code = EXIT_DOMAIN


class ConfigError(CalibkitError):
    """Hyperparameter or config document out of range."""

    exit_code = EXIT_CONFIG


class UsageError(CalibkitError):
    """Empty batches, mismatched lengths, too few samples for the requested bins."""

    exit_code = EXIT_DATA


class DataParseError(CalibkitError):
    """Malformed dataset or prediction file."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")
