"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class MarsError(Exception):
    """Base for all errors raised by this package."""

    exit_code = 1


class DataFormatError(MarsError):
    """Malformed or unusable input data (bad CSV, constant column, ...)."""

    exit_code = 2


class DegenerateLabelError(MarsError):
    """Label column is not usable as a binary target."""

    exit_code = 3


class FeatureMismatchError(MarsError):
    """Prediction input is missing columns the model was trained on."""

    exit_code = 4


class ModelFormatError(MarsError):
    """Model file is corrupt or has an unsupported format version."""

    exit_code = 5
