"""Exception types shared across the package.

The CLI maps these onto exit codes: config problems exit 2, I/O problems
exit 3 (plain OSError), invariant violations detected during a run exit 4.
"""


class DomainError(ValueError):
    """Input outside an operation's mathematical or shape domain."""


class ConfigError(ValueError):
    """Inconsistent run configuration, manifest, or preset."""


class InvariantError(RuntimeError):
    """A locked bound or structural invariant failed during a run."""
