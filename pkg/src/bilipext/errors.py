"""Exception hierarchy shared by every construction."""


class BilipError(ValueError):
    """Base class for validation failures (CLI exit code 1)."""


class PreconditionError(BilipError):
    """An input violates a stated hypothesis; the message names the inequality."""


class GlueError(BilipError):
    pass


class RegionOverlapError(GlueError):
    pass


class BoundaryMismatchError(GlueError):
    pass


class RegionPreservationError(GlueError):
    pass


class TubeOverlapError(BilipError):
    def __init__(self, i, j, gap):
        self.pair = (i, j)
        self.gap = gap
        super().__init__(f"tubes {i} and {j} overlap (gap {gap:.3e})")


class ContainmentError(BilipError):
    """Slab data lands outside the G-image of its own slab."""

    def __init__(self, slab, detail):
        self.slab = slab
        super().__init__(f"slab {slab}: {detail}")


class SchemaError(BilipError):
    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")
