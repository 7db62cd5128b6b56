from __future__ import annotations

from pathlib import Path


class PtexError(Exception):
    """Base class for every error the library raises on purpose."""

    exit_code = 1


class DomainError(PtexError, ValueError):
    def __init__(self, name: str, value: object, expected: str) -> None:
        self.name = name
        self.value = value
        self.expected = expected
        super().__init__(f"{name}={value!r} is outside its domain ({expected})")


class DataError(PtexError):
    exit_code = 2

    def __init__(
        self, message: str, path: str | Path | None = None, line: int | None = None
    ) -> None:
        self.message = message
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path:
            where = self.path
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class SchemaError(DataError):
    pass


class NumericalError(PtexError):
    exit_code = 3


class InfeasibleMoments(NumericalError):
    def __init__(self, m1: float, m2: float, reason: str) -> None:
        self.m1 = m1
        self.m2 = m2
        self.reason = reason
        super().__init__(
            f"Sample moments m1={m1:.6g}, m2={m2:.6g} admit no PTE law: {reason}"
        )


class InfeasibleStatistics(NumericalError):
    def __init__(self, p0: float, mean: float, reason: str) -> None:
        self.p0 = p0
        self.mean = mean
        self.reason = reason
        super().__init__(
            f"Zero proportion p0={p0:.6g} with mean {mean:.6g} admits no PTE law: "
            f"{reason}"
        )


class NonConvergence(NumericalError):
    def __init__(self, message: str, iterations: int = 0) -> None:
        self.iterations = iterations
        super().__init__(message)


class SingularInformation(NumericalError):
    pass


class EmptyCell(NumericalError):
    def __init__(self, lower: int, upper: int | None) -> None:
        self.lower = lower
        self.upper = upper
        label = f"{lower}+" if upper is None else f"[{lower}, {upper}]"
        super().__init__(f"Expected count of cell {label} is zero")


class RankDeficientDesign(NumericalError):
    def __init__(self, rank: int, columns: int) -> None:
        self.rank = rank
        self.columns = columns
        super().__init__(
            f"Design matrix has rank {rank} but {columns} columns; "
            "drop collinear covariates"
        )


class TruncationBudgetExceeded(NumericalError):
    def __init__(self, rows: int, budget: int) -> None:
        self.rows = rows
        self.budget = budget
        super().__init__(
            f"Compound recursion needs {rows} table rows, budget is {budget}"
        )
