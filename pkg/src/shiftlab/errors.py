"""Exception hierarchy shared across the package.

The CLI maps every ``ShiftLabError`` to exit status 2 (usage / configuration
problem); anything else escaping an operation is a bug.
"""


class ShiftLabError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ConfigError(ShiftLabError):
    """Malformed rule literal, family spec, or parameter combination."""


class CapExceeded(ConfigError):
    """A configured enumeration or size cap would be exceeded."""


class HorizonExhausted(ShiftLabError):
    """An operation needs data beyond the window it was given."""


class PreconditionError(ShiftLabError):
    """An operation's documented precondition does not hold."""


class SpacerExhausted(ShiftLabError):
    """The greedy point builder ran out of spacer budget.

    Carries the word that could not be appended so callers can report it.
    """

    def __init__(self, word: str, spacer_max: int):
        self.word = word
        self.spacer_max = spacer_max
        super().__init__(
            f"no spacer g <= {spacer_max} lets the word {word!r} extend the prefix"
        )
