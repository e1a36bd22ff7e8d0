"""Exception types shared by every greening_forge module."""


class ForgeError(Exception):
    """Base class for all greening_forge errors."""


class DomainError(ForgeError, ValueError):
    """An argument violates an operation's precondition (bad sigma, size mismatch, empty mask)."""


class FormatError(ForgeError):
    """An image file uses a bit depth or channel layout we do not decode."""


class UsageError(ForgeError):
    """The command line or its inputs cannot be used as given."""


class ConfigError(UsageError):
    """A synthesis config file is malformed or holds unknown keys."""
