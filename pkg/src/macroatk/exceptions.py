"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`MacroAtKError`.
The CLI maps the three families below onto exit codes 2, 3 and 4.
"""


class MacroAtKError(Exception):
    """Base class for all package errors."""


class ContractError(MacroAtKError, ValueError):
    """Numeric or contract violation in the inputs of an operation."""


class InvalidBudgetError(ContractError):
    pass


class InvalidInputError(ContractError):
    pass


class ShapeError(ContractError):
    pass


class InvalidMarginalsError(ContractError):
    pass


class InvalidClassifierError(ContractError):
    pass


class BudgetViolationError(ContractError):
    pass


class InvalidDistributionError(ContractError):
    pass


class InvalidWeightsError(ContractError):
    pass


class NotABinaryMeasureError(ContractError):
    pass


class UnsupportedMetricError(ContractError):
    pass


class InvalidSplitError(ContractError):
    pass


class SearchSpaceTooLargeError(MacroAtKError):
    pass


class ParseError(MacroAtKError, ValueError):
    """Malformed input file or CLI string.

    ``lineno`` is 1-based and refers to the physical line of the file
    (the header is line 1); it is ``None`` for errors without a location.
    """

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)
