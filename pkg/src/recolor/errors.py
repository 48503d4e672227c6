"""Exception types shared across the package."""


class RecolorError(Exception):
    """Base class for all package errors."""


class FormatError(RecolorError):
    """Input data has the wrong shape, channel count, or value domain."""


class IngestError(RecolorError):
    """A corpus file could not be read or decoded."""

    def __init__(self, path, reason):
        super().__init__(f"cannot ingest {path}: {reason}")
        self.path = str(path)
        self.reason = str(reason)


class ConfigError(RecolorError):
    """A configuration value violates its contract."""


class PartitionError(RecolorError):
    """A model parameter could not be assigned to exactly one named group."""


class WeightLoadError(RecolorError):
    """A backbone weight file does not match the model geometry."""


class CheckpointError(RecolorError):
    """A checkpoint file is missing, corrupt, or has an unsupported version."""


class TrainingError(RecolorError):
    """Training produced a non-finite loss term."""

    def __init__(self, term, step):
        super().__init__(f"non-finite value in loss term '{term}' at step {step}")
        self.term = term
        self.step = step


class ProtocolError(RecolorError):
    """A study-session request violated the judgment protocol."""


class SessionNotFoundError(RecolorError):
    """No study session exists with the requested id."""


class UndefinedStatisticError(RecolorError):
    """An aggregate was requested over an empty set of judgments."""
