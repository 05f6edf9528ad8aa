"""Exception hierarchy shared across the workbench."""


class StrokelabError(Exception):
    """Base class for all expected failures raised by this package."""


class EmptyFile(StrokelabError):
    pass


class MissingColumn(StrokelabError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"required column missing: {name!r}")


class UnparseableValue(StrokelabError):
    def __init__(self, row: int, column: str, detail: str = ""):
        self.row = row
        self.column = column
        msg = f"row {row}: cannot parse column {column!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EmptyInput(StrokelabError):
    pass


class UnknownLevel(StrokelabError):
    def __init__(self, feature: str, level: str):
        self.feature = feature
        self.level = level
        super().__init__(f"unknown level {level!r} for feature {feature!r}")


class InvalidBalance(StrokelabError):
    pass


class NoMinoritySamples(StrokelabError):
    pass


class MajoritySmallerThanMinority(StrokelabError):
    pass


class TooFewRows(StrokelabError):
    pass


class LengthMismatch(StrokelabError):
    pass


class ZeroVariance(StrokelabError):
    def __init__(self, column: str = ""):
        self.column = column
        super().__init__(f"zero variance in column {column!r}" if column else "zero variance input")


class SingleClass(StrokelabError):
    pass


class SchemaMismatch(StrokelabError):
    pass


class NotSymmetric(StrokelabError):
    pass


class NoConvergence(StrokelabError):
    pass


class NonFiniteLoss(StrokelabError):
    pass


class InvalidLabel(StrokelabError):
    pass


class EmptyConfusion(StrokelabError):
    pass
