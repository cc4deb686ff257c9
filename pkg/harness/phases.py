import logging

from core.errors import ModelError
from nn.params import ParameterStore


logger = logging.getLogger(__name__)


class TrainingPhase:
    """
    Context manager around one training phase.

    Announces the phase, records the checksum of every frozen component on entry and
    verifies on exit that none of them changed.

    Attributes:
        name (str): Phase name shown in the banners.
        frozen (dict[str, ParameterStore]): Components that must stay untouched.
        verbose (bool): Whether to print the banners.
    """

    def __init__(self, name: str, frozen: dict[str, ParameterStore] | None = None, verbose: bool = True):
        self.name = name
        self.frozen: dict[str, ParameterStore] = frozen if frozen is not None else {}
        self.verbose = verbose
        self.checksums: dict[str, str] = {}

    def __enter__(self) -> "TrainingPhase":
        if self.verbose:
            print(f"========== Starting phase: {self.name} ==========")
        for label, store in self.frozen.items():
            if not store.frozen:
                raise ModelError(f"{label} must be frozen during {self.name}")
            self.checksums[label] = store.checksum()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        if exc_type is None:
            for label, store in self.frozen.items():
                if store.checksum() != self.checksums[label]:
                    raise ModelError(f"{label} changed during {self.name}")
                logger.debug("%s checksum unchanged after %s", label, self.name)
        if self.verbose:
            print(f"========== Finished phase: {self.name} ==========")
