"""Exception types raised by the solver and harness."""


class EulerBenchError(Exception):
    """Base class for all structured solver errors."""


class NonPhysicalState(EulerBenchError):
    """Density or pressure became non-positive.

    ``element`` and ``point`` locate the offending solution point when the
    caller knows them; ``time`` and ``stage`` are filled in by the time
    integrator on the way out.
    """

    def __init__(self, message, element=None, point=None, time=None, stage=None):
        self.element = element
        self.point = point
        self.time = time
        self.stage = stage
        self.base_message = message
        super().__init__(self._format())

    def _format(self):
        parts = [self.base_message]
        if self.element is not None:
            parts.append(f"element={self.element}")
        if self.point is not None:
            parts.append(f"point={self.point}")
        if self.stage is not None:
            parts.append(f"rk_stage={self.stage}")
        if self.time is not None:
            parts.append(f"t={self.time:.6g}")
        return ", ".join(parts)

    def with_context(self, time=None, stage=None):
        if time is not None:
            self.time = time
        if stage is not None:
            self.stage = stage
        self.args = (self._format(),)
        return self


class InvalidMesh(EulerBenchError):
    pass


class UnsupportedOrder(EulerBenchError):
    pass


class MalformedReference(EulerBenchError):
    pass


class NoCenterlineRow(EulerBenchError):
    pass


class DegenerateInput(EulerBenchError):
    pass


class Unstable(EulerBenchError):
    """No CFL number above the search floor produced a completed run."""
