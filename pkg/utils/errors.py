"""Exception hierarchy shared by the library and the command-line scripts."""


class AbcTorusError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(AbcTorusError, ValueError):
    """A map, stage or combinatorial structure was asked for with invalid parameters."""


class ConstructionError(AbcTorusError):
    """Stage construction hit an internal inconsistency (e.g. no mixing time found)."""


class ConfigError(AbcTorusError):
    """An experiment config file is missing, unreadable or fails validation."""


class VerificationError(AbcTorusError):
    """A verification routine was given input it cannot evaluate (e.g. an empty orbit)."""
