"""Exception hierarchy.

Every error raised for bad input or a broken contract derives from
``PatchBlurError`` so the CLI can map them all to exit code 2.
"""


class PatchBlurError(Exception):
    """Base class for input/contract errors."""


class UnreadableFile(PatchBlurError):
    pass


class UnsupportedFormat(PatchBlurError):
    pass


class InvalidDimensions(PatchBlurError):
    pass


class InvalidParameter(PatchBlurError):
    pass


class EmptyDataset(PatchBlurError):
    pass


class MissingClass(PatchBlurError):
    """Only one label present. Callers doing inference only may ignore it."""


class RegionTooSmall(PatchBlurError):
    pass


class RegionOutOfBounds(PatchBlurError):
    pass


class WindowLargerThanRegion(PatchBlurError):
    pass


class ImageTooSmall(PatchBlurError):
    pass


class DegenerateLabels(PatchBlurError):
    pass


class ShapeMismatch(PatchBlurError):
    pass


class NonFiniteFeature(PatchBlurError):
    pass


class TooFewSamples(PatchBlurError):
    pass


class SingleClass(PatchBlurError):
    pass


class ConfigMismatch(PatchBlurError):
    pass
