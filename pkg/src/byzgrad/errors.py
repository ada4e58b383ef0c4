"""Exception types shared across the package.

Bad arguments to library functions raise plain ``ValueError``; the classes
here cover the two failure modes that need their own exit codes in the CLI.
"""


class ConfigError(Exception):
    """A scenario file is unparseable or violates a scenario invariant."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SimulationAbort(RuntimeError):
    """The round engine hit a non-recoverable numeric condition mid-run."""

    def __init__(self, round_: int, message: str):
        self.round = round_
        super().__init__(f"round {round_}: {message}")
