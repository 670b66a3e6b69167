"""Exception hierarchy shared across the engine.

Exit-code mapping used by the CLI lives in cli.py; keeping the classes here
avoids import cycles between loaders, fitters and the pipeline.
"""


class EngineError(Exception):
    """Base class for anything the engine raises on purpose."""


class ConfigError(EngineError):
    """Bad or missing configuration (unknown key, unparsable value, bad span)."""


class DataError(EngineError):
    """Malformed or inconsistent input data (schema, calendar, masks)."""


class DegeneracyError(EngineError):
    """Numerically degenerate state: rank-deficient window, zero norm, etc."""
