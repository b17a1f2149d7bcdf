class DegenerateError(ValueError):
    """Input has too little structure for the requested computation."""


class EmptyForegroundError(DegenerateError):
    """No leaf pixels were found."""


class ImageFormatError(ValueError):
    """File exists but is not a decodable raster image."""


class ShapeError(ValueError):
    def __init__(self, what, expected, actual):
        super().__init__(f"{what}: expected shape {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class ConvergenceError(RuntimeError):
    def __init__(self, msg, gap):
        super().__init__(f"{msg} (dual gap {gap:.3g})")
        self.gap = gap


class DivergenceError(RuntimeError):
    def __init__(self, epoch, lr):
        super().__init__(f"non-finite loss at epoch {epoch} (lr={lr})")
        self.epoch = epoch
        self.lr = lr


class PlanIntegrityError(ValueError):
    """A fold plan leaks samples between roles or misses samples."""
