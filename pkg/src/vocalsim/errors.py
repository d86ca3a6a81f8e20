"""Exception types shared across the package."""


class DataError(Exception):
    """Bad input data: missing files, malformed manifests, wrong audio format."""


class NumericError(Exception):
    """Numeric failure during training, e.g. a diverging (NaN) loss."""
