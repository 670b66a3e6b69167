"""Exception hierarchy for the trainer.

The CLI maps these to exit codes in cli.py; the classes live here so the
data loader, model builder and training loop can share them without
import cycles.
"""


class TrainerError(Exception):
    """Base class for anything the trainer raises on purpose."""


class ConfigError(TrainerError):
    """Bad or missing configuration (invalid hyperparameter, bad span)."""


class DataError(TrainerError):
    """Malformed or inconsistent input data (schema, shapes, calendar)."""


class TrainingError(TrainerError):
    """Training aborted: non-finite objective or optimizer failure."""
