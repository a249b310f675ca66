"""Shared exception bases. The CLI maps these onto process exit codes:
parse failures exit 2, data-contract violations exit 3, training divergence 4.
"""


class ParseError(ValueError):
    """An input file could not be parsed."""


class DataContractError(ValueError):
    """Parsed data violates a pipeline contract."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite."""
