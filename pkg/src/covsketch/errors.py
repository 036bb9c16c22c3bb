"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError (and bad usage) to 2,
ParseError and I/O failures to 3, GuardExceededError to 4.
"""


class CovsketchError(Exception):
    pass


class ConfigError(CovsketchError):
    """Invalid parameter combination (bad eps domain, lambda out of range, ...)."""


class ParseError(CovsketchError):
    """Malformed edge input. Carries the position of the offending bytes."""

    def __init__(self, message, *, line=None, offset=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(message + suffix)
        self.line = line
        self.offset = offset


class IdRangeError(CovsketchError):
    """A set or element id falls outside the declared universe."""


class IsolatedElementError(CovsketchError):
    """An element with no incident set was found and no attachment seed given."""


class StateError(CovsketchError):
    """Operation applied to an object in the wrong lifecycle state."""


class GuardExceededError(CovsketchError):
    """A brute-force enumeration guard tripped before work started."""


class IncompatibleSketchError(CovsketchError):
    """Merge attempted between sketches with different seeds or capacities."""
