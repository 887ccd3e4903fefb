"""Exception hierarchy for the hard-ball laboratory."""


class BilliardError(Exception):
    """Base class for every error raised by this package."""


class InvalidParams(BilliardError, ValueError):
    pass


class InvalidMatrix(BilliardError, ValueError):
    pass


class PackingError(BilliardError):
    pass


class NotAtContact(BilliardError):
    pass


class SingularEvent(BilliardError):
    """Flow reached a tangential or multiple collision and refused to cross it.

    ``kind`` is ``"tangential"`` or ``"multiple"``; ``events`` holds the
    offending event(s), ``state`` the phase point at the singular instant and
    ``history`` the regular events resolved before it.
    """

    def __init__(self, kind, events, state=None, history=(), elapsed=0.0):
        self.kind = kind
        self.events = tuple(events)
        self.state = state
        self.history = tuple(history)
        self.elapsed = elapsed
        pairs = ", ".join(str(e.pair) for e in self.events)
        super().__init__(f"{kind} event at t={elapsed:.12g} involving {pairs}")


class NoCollision(BilliardError):
    pass


class NoPastReflection(BilliardError):
    pass


class PrescriptionStalled(BilliardError):
    def __init__(self, pair, consumed):
        self.pair = pair
        self.consumed = consumed
        super().__init__(f"prescribed pair {pair} never collides (after {consumed} consumed)")


class InvalidPair(BilliardError, ValueError):
    pass


class NotConnected(BilliardError):
    def __init__(self, components):
        self.components = components
        super().__init__(f"collision graph has {components} connected components")


class SingularSegment(BilliardError):
    pass


class EmbeddingViolation(BilliardError):
    pass


class NoRelation(BilliardError):
    pass


class FragileSegment(BilliardError):
    pass


class SequenceUnstable(BilliardError):
    pass


class NotEnoughSamples(BilliardError):
    pass


class SequenceUnrealizable(BilliardError):
    pass


class NoTransversalEntry(BilliardError):
    pass


class InvalidFamily(BilliardError, ValueError):
    pass


class EnvelopeMismatch(BilliardError):
    pass


class ConfigError(BilliardError, ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        self.message = message
        where = f"{source or '<config>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


class CorruptRun(BilliardError):
    pass
