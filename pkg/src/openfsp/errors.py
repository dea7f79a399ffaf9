"""Exception hierarchy shared by every openfsp module."""


class OpenFSPError(Exception):
    """Base class for domain errors (the CLI maps these to exit code 1)."""


class UnknownLabel(OpenFSPError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class OntologyConflict(OpenFSPError):
    pass


class MalformedTree(OpenFSPError, ValueError):
    pass


class NestedIntent(OpenFSPError):
    pass


class DimensionMismatch(OpenFSPError, ValueError):
    pass


class ProviderUnavailable(OpenFSPError):
    pass


class CacheCorrupt(OpenFSPError):
    pass


class DegenerateData(OpenFSPError, ValueError):
    pass


class ProviderMismatch(OpenFSPError):
    pass


class EmptyTrainingSet(OpenFSPError, ValueError):
    pass


class Ineligible(OpenFSPError, ValueError):
    pass


class NoEligibleFrame(OpenFSPError):
    pass


class SchemaError(OpenFSPError, ValueError):
    pass


class UnknownAgnosticType(SchemaError):
    pass


class DuplicateTemplate(SchemaError):
    pass


class MissingExamples(SchemaError):
    pass


class MissingDomain(OpenFSPError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LengthMismatch(OpenFSPError, ValueError):
    pass


class LabelUnderpopulated(UserWarning):
    """Fewer distinct texts than requested were available for a label."""
