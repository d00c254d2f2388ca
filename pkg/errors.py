"""
Error registry: one exception hierarchy for the solver plus the categories
the command line uses to explain failures and pick exit codes.

Every exception carries a `category` key into ERROR_CATEGORIES. The usage-type
errors also subclass ValueError so plain Python callers can catch them the
usual way.
"""

ERROR_CATEGORIES = {
    "usage": {
        "name": "Usage error",
        "description": "Arguments do not fit together (field, dimension, permutation or flag mismatch).",
        "exit_code": 1,
    },
    "parse": {
        "name": "Malformed document",
        "description": "An instance, schedule or config document could not be read.",
        "exit_code": 1,
    },
    "field_size": {
        "name": "Field too small",
        "description": "The coding field must have at least as many elements as the scheme needs.",
        "exit_code": 1,
    },
    "infeasible": {
        "name": "No avoiding vector",
        "description": "Some obstacle subspace already contains the whole source subspace.",
        "exit_code": 1,
    },
    "underdetermined": {
        "name": "Not decodable",
        "description": "The received coding vectors do not span the full packet space.",
        "exit_code": 2,
    },
    "corruption": {
        "name": "Inconsistent payloads",
        "description": "Received payloads contradict each other under their coding vectors.",
        "exit_code": 2,
    },
    "verification": {
        "name": "Schedule failed verification",
        "description": "Replaying the schedule left a client short of full rank or used an illegal sender.",
        "exit_code": 2,
    },
    "invariant": {
        "name": "Experiment invariant violated",
        "description": "A trial broke lower <= IE <= min(upper_leader, n).",
        "exit_code": 2,
    },
    "capacity": {
        "name": "Search too large",
        "description": "Exhaustive enumeration exceeded its cap or budget; bounds are reported instead.",
        "exit_code": 3,
    },
}


class CDEError(Exception):
    category = "usage"


class UsageError(CDEError, ValueError):
    category = "usage"


class ParseError(UsageError):
    category = "parse"

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class FieldSizeError(UsageError):
    category = "field_size"


class InfeasibleError(CDEError):
    category = "infeasible"


class UnderdeterminedError(CDEError):
    category = "underdetermined"


class CorruptionError(CDEError):
    category = "corruption"


class VerificationError(CDEError):
    category = "verification"

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class CapacityError(CDEError):
    category = "capacity"

    def __init__(self, message, bracket=None):
        # (lower, upper_leader) when the caller can still offer bounds
        self.bracket = bracket
        super().__init__(message)


class ExperimentInvariantError(CDEError):
    category = "invariant"

    def __init__(self, message, instance_document=None):
        self.instance_document = instance_document
        super().__init__(message)


def explain(error):
    """Turn an exception into a user-facing dict for the CLI."""
    category = getattr(error, "category", "usage")
    info = ERROR_CATEGORIES.get(category, ERROR_CATEGORIES["usage"])
    return {
        "category": category,
        "name": info["name"],
        "description": info["description"],
        "detail": str(error),
        "exit_code": info["exit_code"],
    }


def exit_code_for(error):
    return explain(error)["exit_code"]
