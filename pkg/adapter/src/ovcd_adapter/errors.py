"""Adapter error hierarchy."""


class AdapterError(Exception):
    """Base for everything the adapter raises deliberately."""


class RetriableAdapterError(AdapterError):
    """A transient failure (e.g. a model endpoint); safe to retry."""


class TrainingError(AdapterError):
    """Training diverged or produced non-finite losses."""
