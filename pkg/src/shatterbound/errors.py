"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ShatterboundError(Exception):
    exit_code = 1


class ConfigError(ShatterboundError, ValueError):
    exit_code = 2


class ParseError(ShatterboundError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None, column=None, layer=None):
        self.line = line
        self.column = column
        self.layer = layer
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if layer is not None:
            where.append(f"layer {layer}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class FitError(ShatterboundError, ValueError):
    exit_code = 4


class DomainError(ShatterboundError, ValueError):
    exit_code = 4


class CompositionError(DomainError):
    pass


class ResourceError(ShatterboundError, MemoryError):
    exit_code = 5
