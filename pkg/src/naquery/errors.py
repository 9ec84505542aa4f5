"""Exception hierarchy shared across the pipeline."""


class NaqueryError(Exception):
    """Base class for all package errors."""


# --- dataset loading ---

class MissingFile(NaqueryError):
    pass


class ShapeMismatch(NaqueryError):
    pass


class LabelOutOfRange(NaqueryError):
    pass


class EmptyGroup(NaqueryError):
    pass


# --- query parsing / rendering ---

class NoJsonFound(NaqueryError):
    pass


class SchemaViolation(NaqueryError):
    def __init__(self, message, missing=(), extra=()):
        super().__init__(message)
        self.missing = list(missing)
        self.extra = list(extra)


class RenderFailure(NaqueryError):
    pass


# --- architecture IR ---

class ShapeUnderflow(NaqueryError):
    def __init__(self, layer_index, message):
        super().__init__(message)
        self.layer_index = layer_index


class NoSpaceFound(NaqueryError):
    pass


class EmptySpaceDimension(NaqueryError):
    pass


# --- agent loop ---

class RewriteFailed(NaqueryError):
    pass


class DesignFailed(NaqueryError):
    pass


class EvalLLMFailed(NaqueryError):
    pass


class EmptyRound(NaqueryError):
    pass


class NoCandidates(NaqueryError):
    pass


class MockFixtureExhausted(NaqueryError):
    pass


class BackendError(NaqueryError):
    pass


# --- code generation ---

class NoCodeFence(NaqueryError):
    pass


class TemplateTampered(NaqueryError):
    pass


class UnsupportedLayer(NaqueryError):
    pass
