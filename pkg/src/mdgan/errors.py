"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid dimensions, options, or input shapes."""


class StateError(RuntimeError):
    """Operation called in the wrong order (e.g. backward before forward)."""


class TrainingDiverged(RuntimeError):
    """A loss became non-finite during training.

    Carries enough context (step name, epoch) to locate the failure in the
    loss traces.
    """

    def __init__(self, step: str, epoch: int, value: float):
        self.step = step
        self.epoch = epoch
        self.value = value
        super().__init__(
            f"non-finite loss ({value!r}) at step '{step}' in epoch {epoch}"
        )
