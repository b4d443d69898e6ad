"""Exception hierarchy shared by every stage of the pipeline."""


class HyperrankError(Exception):
    """Base class; ``stage`` names the pipeline stage that raised."""

    stage = "core"


class PrecisionExhausted(HyperrankError, ValueError):
    pass


class GridMismatch(HyperrankError, ValueError):
    pass


class MissingCertificate(HyperrankError, ValueError):
    pass


class DomainViolation(HyperrankError, ValueError):
    pass


class Unsupported(HyperrankError, ValueError):
    pass


class LevelSetEmpty(HyperrankError):
    stage = "build-cantor"

    def __init__(self, message, cover=None):
        super().__init__(message)
        self.cover = cover


class DepthUnreachable(HyperrankError):
    stage = "build-cantor"

    def __init__(self, message, max_depth):
        super().__init__(message)
        self.max_depth = max_depth


class SingularPoint(HyperrankError, ValueError):
    stage = "verify-identities"


class AccuracyUnattainable(HyperrankError):
    stage = "verify-identities"

    def __init__(self, message, required_nodes=None):
        super().__init__(message)
        self.required_nodes = required_nodes


class QuadratureInconsistency(HyperrankError):
    stage = "build-model"


class HyperplaneDegenerate(HyperrankError):
    stage = "build-model"


class AuditFailure(HyperrankError):
    stage = "decompose"

    def __init__(self, message, quantity=None):
        super().__init__(message)
        self.quantity = quantity


class StepLimit(HyperrankError):
    stage = "orbit"


class ConfigInvalid(HyperrankError, ValueError):
    stage = "config"
