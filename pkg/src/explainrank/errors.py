"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for errors raised by this package."""


class FormatError(PipelineError):
    """An input file is malformed (bad header, bad field, bad dimension)."""


class DataError(PipelineError):
    """Inputs are well-formed but violate a content contract."""
