"""Exception types shared by the middleware, the ANFs and the harness.

Every error carries a stable ``code`` string.  Inside a handler chain these
errors are converted to error responses (see :meth:`Message.error_reply`)
rather than propagated, so a request is never silently dropped.
"""


class QosError(Exception):
    code = "ERROR"

    def __init__(self, detail: str = ""):
        super().__init__(f"{self.code}: {detail}" if detail else self.code)
        self.detail = detail


class MalformedMessage(QosError):
    code = "MALFORMED_MESSAGE"


class DuplicatePlugin(QosError):
    code = "DUPLICATE_PLUGIN"


class InvalidPosition(QosError):
    code = "INVALID_POSITION"


class UnknownPlugin(QosError):
    code = "UNKNOWN_PLUGIN"


class AlreadyStarted(QosError):
    code = "ALREADY_STARTED"


class NotStarted(QosError):
    code = "NOT_STARTED"


class UninstallWhileStarted(QosError):
    code = "UNINSTALL_WHILE_STARTED"


class CoreProtected(QosError):
    code = "CORE_PROTECTED"


class NotFound(QosError):
    code = "NOT_FOUND"


class UpstreamUnreachable(QosError):
    code = "UPSTREAM_UNREACHABLE"


class DoubleCompression(QosError):
    code = "DOUBLE_COMPRESSION"


class CorruptStream(QosError):
    code = "CORRUPT_STREAM"


class InvalidPolicy(QosError):
    code = "INVALID_POLICY"


class NoPlacement(QosError):
    code = "NO_PLACEMENT"


class FatalInconsistent(QosError):
    code = "FATAL_INCONSISTENT"


class ConfigInvalid(QosError):
    code = "CONFIG_INVALID"


class UnreachableTarget(QosError):
    code = "UNREACHABLE_TARGET"
