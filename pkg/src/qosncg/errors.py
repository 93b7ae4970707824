"""Exception hierarchy shared by the package."""


class NCGError(Exception):
    """Base class for all errors raised by qosncg."""


class ValidationError(NCGError, ValueError):
    pass


class BadInterval(ValidationError):
    pass


class NonPositivePrice(ValidationError):
    pass


class NotDecreasing(ValidationError):
    pass


class OutOfDomain(NCGError, ValueError):
    pass


class InvalidProfile(NCGError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"node {node}: {message}")
        self.node = node


class LimitExceeded(NCGError):
    pass


class CapExceeded(NCGError):
    pass


class PreconditionFailed(NCGError):
    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("preconditions failed: " + ", ".join(self.failed))


class NotCertified(NCGError):
    pass


class Disconnected(NCGError):
    pass


class InvalidConfig(NCGError, ValueError):
    pass
