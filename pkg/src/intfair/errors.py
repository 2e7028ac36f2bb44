"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the front end can
translate failures without a lookup table.
"""


class AuditError(Exception):
    exit_code = 2


class SchemaError(AuditError):
    """Record or schema does not match the declared alphabets."""


class NoDataError(AuditError):
    pass


class ParameterError(AuditError, ValueError):
    pass


class StructureError(AuditError, ValueError):
    """Malformed partition, block or index set."""


class UndefinedConditionalError(AuditError):
    """A protected group has zero mass, so p(y | a) is undefined."""

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group


class InfiniteUnfairnessError(AuditError):
    """A ratio-based functional hit a zero conditional probability."""

    def __init__(self, message, label=None, group=None):
        super().__init__(message)
        self.label = label
        self.group = group


class BudgetExceededError(AuditError):
    exit_code = 4

    def __init__(self, message, budget=None, required=None):
        super().__init__(message)
        self.budget = budget
        self.required = required


class InfeasiblePreconditionError(AuditError):
    exit_code = 3

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class SolverInfeasibleError(AuditError):
    exit_code = 3
