class SphereLabError(Exception):
    pass


class ParameterError(SphereLabError, ValueError):
    pass


class DimensionMismatchError(ParameterError):
    pass


class DomainError(ParameterError):
    pass


class InvalidCovarianceError(ParameterError):
    pass


class EmptySampleError(ParameterError):
    pass


class DegenerateDisorderError(SphereLabError):
    pass


class ZeroReferenceError(SphereLabError):
    pass


class ParamagneticError(SphereLabError):
    pass


class ConstraintViolationError(SphereLabError):
    pass


class NonConvergenceError(SphereLabError):
    def __init__(self, message, gradient_norm):
        super().__init__('{} (gradient norm {:.3e})'.format(
            message, gradient_norm))
        self.gradient_norm = gradient_norm


class QuadratureResolutionError(SphereLabError):
    def __init__(self, message, estimated_error):
        super().__init__('{} (estimated error {:.3e})'.format(
            message, estimated_error))
        self.estimated_error = estimated_error
