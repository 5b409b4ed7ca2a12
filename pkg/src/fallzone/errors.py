"""Exception hierarchy shared by every fallzone module."""

from __future__ import annotations


class FallzoneError(Exception):
    """Base class for all errors raised by this package."""


class InputError(FallzoneError, ValueError):
    """Malformed or unusable input (files, frames, arguments)."""


class InvariantViolation(FallzoneError):
    """A data-model invariant does not hold."""


# -- zone map ---------------------------------------------------------------

class ZoneMapError(InvariantViolation):
    pass


class EmptyMap(ZoneMapError):
    def __init__(self) -> None:
        super().__init__("zone map is empty")


class DuplicateZoneId(ZoneMapError):
    def __init__(self, zone_id: str) -> None:
        super().__init__(f"duplicate zone id {zone_id!r}")
        self.zone_id = zone_id


class OverlappingZones(ZoneMapError):
    def __init__(self, id_a: str, id_b: str) -> None:
        super().__init__(f"zones {id_a!r} and {id_b!r} overlap")
        self.id_a = id_a
        self.id_b = id_b


class UnknownZoneId(InputError):
    def __init__(self, zone_id: str) -> None:
        super().__init__(f"zone id {zone_id!r} is not in the zone map")
        self.zone_id = zone_id


# -- features ---------------------------------------------------------------

class DegenerateVector(FallzoneError):
    """Acceleration too small to define an orientation."""


class AllDegenerate(FallzoneError):
    """No sample in a window yields orientation angles."""


class UnsortedStream(InputError):
    pass


# -- learners ---------------------------------------------------------------

class DimensionMismatch(InputError):
    def __init__(self, expected: int, got: int) -> None:
        super().__init__(f"expected {expected} features, got {got}")
        self.expected = expected
        self.got = got


class EmptyDataset(InputError):
    pass


class EmptyNode(FallzoneError):
    pass


class EmptyMatrix(FallzoneError):
    pass


class TooFewRows(InputError):
    pass


class NoUsefulWeakLearner(FallzoneError):
    pass


class ModelFormatError(InputError):
    """Model file has the wrong format, version, or dimensionality."""


# -- detectors --------------------------------------------------------------

class InsufficientData(InputError):
    pass


class SingleClass(InsufficientData):
    pass


# -- gateway ----------------------------------------------------------------

class FrameParse(InputError):
    def __init__(self, position: int, reason: str) -> None:
        super().__init__(f"frame parse error at {position}: {reason}")
        self.position = position
        self.reason = reason


class UnknownKind(InputError):
    def __init__(self, kind: object) -> None:
        super().__init__(f"unknown frame kind {kind!r}")
        self.kind = kind


class IoFailure(InputError):
    """A log or table file could not be written or read."""


class InvertedRange(InputError):
    def __init__(self, t0: int, t1: int) -> None:
        super().__init__(f"inverted range: t0={t0} > t1={t1}")


class BindFailure(FallzoneError):
    pass
