"""Exception hierarchy shared by all typelink modules."""


class TypelinkError(Exception):
    """Base class for every error raised by this package."""


class InputError(TypelinkError):
    """Bad user input: malformed files, unknown identifiers, invalid spans."""


class ParseError(InputError):
    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class DuplicateFineType(InputError):
    pass


class UnknownFineType(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownGroup(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class DuplicateCui(InputError):
    pass


class MissingTypes(InputError):
    pass


class UnknownCui(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownDocument(InputError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SpanError(InputError):
    def __init__(self, doc_id: str, start: int, end: int, detail: str = ""):
        self.doc_id = doc_id
        self.start = start
        self.end = end
        msg = f"invalid span [{start}, {end}) in document {doc_id!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DuplicateCandidate(InputError):
    pass


class RangeError(InputError, ValueError):
    pass


class EmptyDataset(InputError):
    pass


class NumericalDivergence(TypelinkError):
    def __init__(self, epoch: int, message: str = "non-finite training loss"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")


class UndefinedMetric(TypelinkError):
    pass


class AlignmentError(InputError):
    pass


class InjectivityError(InputError):
    pass


class EmptyOverlap(InputError):
    pass


class ConfigError(InputError):
    pass
