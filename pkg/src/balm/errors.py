"""Exception types shared across the package."""


class BalmError(Exception):
    """Base class for package-specific failures."""


class ConfigError(BalmError):
    """Mismatch between supplied data and the configured architecture."""


class NumericError(BalmError):
    """A non-finite value appeared inside a computation."""


class BlobError(BalmError):
    """A serialized model blob could not be decoded."""


class DataError(BalmError):
    """A dataset file is malformed; message names the offending line."""
