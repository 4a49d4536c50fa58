"""Error taxonomy for the bridge: startup problems abort, request problems
become protocol-level failure replies."""


class BridgeError(Exception):
    """Base class for all bridge errors."""


class StartupError(BridgeError):
    """Configuration or model-loading problem; the server refuses to start."""


class RequestError(BridgeError):
    """A single request could not be served; mapped to an HTTP 400 reply."""
