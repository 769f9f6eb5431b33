"""Exception hierarchy shared across the simulator.

Every error raised on purpose by the library derives from ``SimError`` so
callers (and the CLI) can catch the whole family at once.  Where a builtin
exception already carries the right meaning it is mixed in as well, so
``except OverflowError`` keeps working for callers that expect it.
"""


class SimError(Exception):
    """Base class for all simulator errors."""


# -- fixed-point -------------------------------------------------------------

class FixedPointOverflow(SimError, OverflowError):
    """A value left the 128-bit storage or 256-bit intermediate range."""


class DivisionByZero(SimError, ZeroDivisionError):
    pass


class ScaleError(SimError, ValueError):
    """Scale exponent outside [1, 18]."""


# -- inference ---------------------------------------------------------------

class DimensionMismatch(SimError, ValueError):
    pass


class KernelTooLarge(SimError, ValueError):
    pass


class MalformedTree(SimError, ValueError):
    pass


class MalformedModel(SimError, ValueError):
    """Weight/bias counts do not match the architecture."""


class UnsupportedArch(SimError, TypeError):
    pass


class EmptyValidationSet(SimError, ValueError):
    pass


# -- poim --------------------------------------------------------------------

class EmptyTestSet(SimError, ValueError):
    pass


class InsufficientStake(SimError):
    pass


class InsufficientBalance(SimError):
    pass


class WindowExpired(SimError):
    pass


class UnknownVersion(SimError):
    pass


class DuplicateChallenge(SimError):
    pass


class DeadlineNotReached(SimError):
    pass


class DeadlinePassed(SimError):
    pass


class DoubleVote(SimError):
    pass


class InsufficientVotingPower(SimError):
    pass


class WouldEmptyClass(SimError):
    pass


class RollbackTooDeep(SimError):
    pass


class ChallengeClosed(SimError):
    pass


# -- bridge ------------------------------------------------------------------

class MalformedBytes(SimError, ValueError):
    pass


class NoAcceptedModel(SimError):
    pass


class NoCommitment(SimError):
    pass


class NoModelInstalled(SimError):
    pass


class ConsistencyError(SimError, AssertionError):
    """A runtime consistency verification failed."""


# -- chainsim ----------------------------------------------------------------

class OutOfGas(SimError):
    pass


class GasLimitExceeded(SimError):
    """Declared gas limit above the block gas limit."""


class UnknownSender(SimError):
    pass


class UnknownOperation(SimError):
    pass


class NotAView(SimError):
    pass


# -- dataset -----------------------------------------------------------------

class ParseError(SimError, ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingColumn(SimError, ValueError):
    pass


class EmptyInput(SimError, ValueError):
    pass


class EmptyTrain(SimError, ValueError):
    pass


# -- analysis ----------------------------------------------------------------

class DegenerateInput(SimError, ValueError):
    pass


class KTooLarge(SimError, ValueError):
    pass


class SingleCluster(SimError, ValueError):
    pass


# -- config ------------------------------------------------------------------

class ConfigError(SimError, ValueError):
    pass
