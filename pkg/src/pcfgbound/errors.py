"""Exception hierarchy shared by all modules."""


class PCFGError(Exception):
    """Base class for every error raised by this package."""


class GrammarError(PCFGError):
    pass


class MalformedLine(GrammarError):
    def __init__(self, lineno, line, reason):
        self.lineno = lineno
        self.line = line
        super().__init__("line %d: %s: %r" % (lineno, reason, line))


class ArityError(MalformedLine):
    pass


class NormalizationError(GrammarError):
    def __init__(self, lhs, total):
        self.lhs = lhs
        self.total = total
        super().__init__("rules of %s sum to %.9g, not 1" % (lhs, total))


class UnknownStart(GrammarError):
    pass


class DivergentClosure(GrammarError):
    """Unary or left-corner closure does not converge (supercritical cycle)."""


class UnknownToken(PCFGError, KeyError):
    def __init__(self, token, position=None):
        self.token = token
        self.position = position
        where = "" if position is None else " at position %d" % position
        super().__init__("token %r not in grammar vocabulary%s" % (token, where))

    def __str__(self):
        return self.args[0]


class NoParse(PCFGError):
    pass


class NoContextParse(PCFGError):
    pass


class DeadPrefix(PCFGError):
    def __init__(self, position):
        self.position = position
        super().__init__("prefix has zero probability at position %d" % position)


class Rejected(PCFGError):
    """A sampled derivation was abandoned (not a fault)."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class ExhaustedBudget(PCFGError):
    pass


class FitDiverged(PCFGError):
    pass


class DegenerateInput(PCFGError, ValueError):
    pass


class EmptyHalf(PCFGError, ValueError):
    pass


class TokenMismatch(PCFGError):
    def __init__(self, key, expected, found):
        self.key = key
        super().__init__(
            "sentence %s position %s: grammar token %r but LM token %r"
            % (key[0], key[1], expected, found))


class RawLogits(PCFGError, ValueError):
    pass


class UnmappedTag(PCFGError, KeyError):
    def __str__(self):
        return "tag %r has no POS class" % self.args[0]


class ConfigError(PCFGError):
    pass
