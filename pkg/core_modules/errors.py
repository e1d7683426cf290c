# errors.py
# Exception hierarchy and CLI exit codes for the heavy-path laboratory

import logging

logger = logging.getLogger(__name__)


class GWLabError(Exception):
    """Base class for every error raised by the laboratory"""


class ConfigurationError(GWLabError, ValueError):
    """Unknown names, bad parameter values, malformed config files"""


class UnsupportedSupportError(ConfigurationError):
    """Sampler cannot handle the support of the offspring law"""


class DomainError(GWLabError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class NonCriticalError(DomainError):
    """Offspring mean differs from 1"""


class DegenerateError(DomainError):
    """Offspring variance is zero"""


class MalformedTreeError(DomainError):
    """Degree sequence violates the Lukasiewicz constraints"""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ResourceGuardError(GWLabError, RuntimeError):
    """A size guard or attempt budget was exceeded"""


class InvariantViolationError(GWLabError, RuntimeError):
    """Internal consistency check failed (a bug, never expected)"""


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_RESOURCE = 4

EXIT_CODES = {
    ConfigurationError: EXIT_USAGE,
    DomainError: EXIT_DOMAIN,
    ResourceGuardError: EXIT_RESOURCE,
    InvariantViolationError: EXIT_FAILURE,
}


def exit_code_for(exc):
    """Map an exception to the CLI exit code"""
    for exc_type, code in EXIT_CODES.items():
        if isinstance(exc, exc_type):
            return code
    return EXIT_FAILURE


def invariant(condition, message):
    """Raise InvariantViolationError (and log it) when condition is false"""
    if not condition:
        logger.error("❌ invariant violated: %s", message)
        raise InvariantViolationError(message)
