"""Exception hierarchy shared by the library and the CLI."""


class HRMCError(Exception):
    """Base class for all package errors."""


class EmptyBasisError(HRMCError, ValueError):
    pass


class UnderdeterminedError(HRMCError):
    """Fewer observations than unknown weights."""


class DegenerateRestrictionError(HRMCError):
    """The basis restricted to the observed rows is numerically singular."""


class UnsamplableLineError(HRMCError):
    """A row or column of a matrix handed to the completion engine is empty."""

    def __init__(self, axis: str, index: int):
        self.axis = axis
        self.index = index
        super().__init__(f"unsamplable line: {axis} {index} has no observations")


class InsufficientSeedsError(HRMCError):
    def __init__(self, achieved: int, required: int):
        self.achieved = achieved
        self.required = required
        super().__init__(
            f"insufficient seed candidates: found {achieved}, need {required}"
        )


class NeighborhoodError(HRMCError):
    """A seed could not be given a neighborhood; the seed is discarded."""

    def __init__(self, reason: str, seed: int, found: int, required: int):
        self.reason = reason
        self.seed = seed
        self.found = found
        self.required = required
        super().__init__(f"{reason} for seed {seed}: {found} < {required}")


class NoCandidatesError(HRMCError):
    def __init__(self, msg: str = "no candidate subspaces"):
        super().__init__(msg)


class FormatError(HRMCError, ValueError):
    """Malformed matrix/labels file."""

    def __init__(self, msg: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {msg}" if where else msg)
