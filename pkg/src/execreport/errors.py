"""Exception hierarchy shared by all phases."""


class ExecReportError(Exception):
    """Base class for every error raised by this package."""


class MiniCError(ExecReportError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if col else (f"{line}: " if line else "")
        super().__init__(f"{where}{message}")


class MiniCSyntaxError(MiniCError):
    pass


class MiniCSemanticError(MiniCError):
    pass


class CFABuildError(MiniCError):
    """Inline depth exceeded, bad entry function, non-constant array sizes."""


class UnknownLocationError(ExecReportError, KeyError):
    pass


class DetachedNodeError(ExecReportError):
    pass


class PropertyViolation(ExecReportError, AssertionError):
    """An ART structural invariant (e.g. coverage non-chaining) was broken."""


class AutomatonFormatError(ExecReportError):
    pass


class SourceMismatchError(ExecReportError):
    pass


class InternalConsistencyError(ExecReportError):
    """Phase two stepped into the automaton's dead sink."""


class OracleResourceError(ExecReportError):
    """Brute-force enumeration exceeded its configured limits."""


class ParameterMismatchError(ExecReportError):
    pass
