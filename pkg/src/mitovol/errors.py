"""Exception types shared across the package.

Every error carries a machine-readable ``code`` that the CLI emits in its
one-line error JSON. Instances may override the class default code.
"""


class MitovolError(Exception):
    code = "error"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InvalidParameterError(MitovolError, ValueError):
    code = "invalid_parameter"


class InvalidInputError(MitovolError, ValueError):
    code = "invalid_input"


class InvalidTransformError(MitovolError, ValueError):
    code = "invalid_transform"


class IllConditionedStainMatrixError(MitovolError, ValueError):
    code = "ill_conditioned_stain_matrix"


class UndefinedIndexError(MitovolError, ArithmeticError):
    code = "undefined_index"


class InconsistentFieldError(MitovolError, ValueError):
    code = "inconsistent_field"


class UndefinedCorrelationError(MitovolError, ArithmeticError):
    code = "undefined_correlation"


class ConfigError(MitovolError, ValueError):
    code = "config_error"


class ManifestError(MitovolError, ValueError):
    code = "manifest_error"
