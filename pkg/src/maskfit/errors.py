"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 2 for input/parse
problems, 3 for degenerate geometry or singular systems, 4 for convergence
failures.
"""


class MaskfitError(Exception):
    exit_code = 1


class ParseError(MaskfitError):
    exit_code = 2

    def __init__(self, message, path=None, location=None):
        self.path = path
        self.location = location
        prefix = ""
        if path is not None:
            prefix = f"{path}"
            if location is not None:
                prefix += f":{location}"
            prefix += ": "
        super().__init__(prefix + message)


class UnsupportedFeature(ParseError):
    pass


class MissingIntrinsics(ParseError):
    pass


class GeometryError(MaskfitError):
    exit_code = 3


class ZeroAreaFace(GeometryError):
    pass


class NonManifoldEdge(GeometryError):
    pass


class EmptyPointSet(GeometryError):
    pass


class NoValidPixel(GeometryError):
    pass


class BehindCamera(GeometryError):
    pass


class TooFewLandmarks(GeometryError):
    pass


class DegenerateScale(GeometryError):
    pass


class DegenerateConfiguration(GeometryError):
    pass


class SingularSystem(GeometryError):
    pass


class InvalidRegionIndex(GeometryError):
    pass


class MapOutOfRange(GeometryError):
    pass


class OutOfDomain(GeometryError):
    pass


class UndefinedCV(GeometryError):
    pass


class ConvergenceError(MaskfitError):
    exit_code = 4


class AllPairsPruned(ConvergenceError):
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)


class NoContact(MaskfitError):
    """Raised by strict callers only; the press simulation reports it as a flag."""

    exit_code = 0
