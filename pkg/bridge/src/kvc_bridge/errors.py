"""Bridge-side exception hierarchy."""


class BridgeError(Exception):
    """Base class for errors raised by the bridge."""


class AudioError(BridgeError):
    """Unreadable audio, unsupported encoding, or wrong sample rate."""


class FeatureFormatError(BridgeError):
    """A byte stream does not conform to the feature-file contract."""


class BridgeConfigError(BridgeError):
    """Incompatible dimensions or unsupported backend settings."""


class EmptyInputError(BridgeError):
    """An operation received zero frames or zero samples."""


class DependencyError(BridgeError):
    """A pretrained-model backend needs packages or weights that are
    not available in this environment."""
