"""Root exception types shared by every tandem package."""


class TandemError(Exception):
    """Base class for all tandem errors."""


class ConfigError(TandemError, ValueError):
    """Settings failed validation or could not be loaded."""
