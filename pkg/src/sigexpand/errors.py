"""Exception types shared across the package."""


class CorruptDatasetError(ValueError):
    """A dataset or checkpoint file failed structural validation on read."""


class SizingError(ValueError):
    """A requested split/budget/quota cannot be satisfied by the available pool."""


class ConfigError(ValueError):
    """An experiment config failed validation; message lists every offending key."""
