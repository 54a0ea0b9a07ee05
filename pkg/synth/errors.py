from system.errors import TandemError


class SynthError(TandemError):
    """Base class for synthesis failures."""


class InvalidPlan(SynthError):
    """A workflow plan names unknown stages or breaks stage ordering."""


class ContractViolation(SynthError):
    """A stage produced an artifact that fails its output contract."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


class BackendFailure(SynthError):
    """The chat-completion backend could not produce a response."""


class DriftUnrecoverable(SynthError):
    """A prompt set drifted during scaled generation and its local pilot did not reconverge."""

    def __init__(self, set_id: str, message: str):
        super().__init__(f"prompt set {set_id}: {message}")
        self.set_id = set_id
