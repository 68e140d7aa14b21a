class VancoriskError(Exception):
    """Base class for library errors."""


class MissingVancoTimeError(VancoriskError):
    pass


class MissingBaselineError(VancoriskError):
    pass


class SchemaError(VancoriskError):
    """Input table or artifact does not match its documented schema."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InsufficientDataError(VancoriskError):
    pass


class UnsupportedModelError(VancoriskError):
    pass


class ConfigError(VancoriskError):
    pass


class TrainingDivergedError(VancoriskError):
    pass
