"""Exception types raised by the engine.

Every error that can cross the wire maps to a structured error envelope;
``code`` is the stable identifier clients switch on.
"""


class EngineError(Exception):
    code = "EngineError"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


# ingest
class UnknownGroup(EngineError):
    code = "UnknownGroup"


class UnknownDiscussionPoint(EngineError):
    code = "UnknownDiscussionPoint"


class SessionClosed(EngineError):
    code = "SessionClosed"


class MissingKeywordConfig(EngineError):
    code = "MissingKeywordConfig"


# analytics
class UnknownRecord(EngineError):
    code = "UnknownRecord"


class SessionNotStarted(EngineError):
    code = "SessionNotStarted"


# deck
class InvalidRegionPlan(EngineError):
    code = "InvalidRegionPlan"


class TargetNotFound(EngineError):
    code = "TargetNotFound"


class LayoutConstraintViolated(EngineError):
    code = "LayoutConstraintViolated"


class EmptyDeck(EngineError):
    code = "EmptyDeck"


# binding
class RegionOccupiedByForeignBinding(EngineError):
    code = "RegionOccupiedByForeignBinding"


class BindingNotFound(EngineError):
    code = "BindingNotFound"


# generation pipeline
class NoEligibleRecords(EngineError):
    code = "NoEligibleRecords"


class ProviderError(EngineError):
    code = "ProviderError"


class ProviderUnavailable(EngineError):
    code = "ProviderUnavailable"


class SlideFull(EngineError):
    code = "SlideFull"


# suggestions
class EmptyAnalytics(EngineError):
    code = "EmptyAnalytics"


class NothingToSuggest(EngineError):
    code = "NothingToSuggest"


class SuggestionStale(EngineError):
    code = "SuggestionStale"


# commands
class UnresolvedDeixis(EngineError):
    code = "UnresolvedDeixis"


class AmbiguousTarget(EngineError):
    code = "AmbiguousTarget"


class UnknownCommand(EngineError):
    code = "UnknownCommand"


class NoMaterialConfigured(EngineError):
    code = "NoMaterialConfigured"


class NoRelevantPassage(EngineError):
    code = "NoRelevantPassage"


# service
class BadTranscript(EngineError):
    code = "BadTranscript"


class ConfigInvalid(EngineError):
    code = "ConfigInvalid"


class ProtocolViolation(EngineError):
    code = "ProtocolViolation"


class UnknownSession(EngineError):
    code = "UnknownSession"


class StorageFailure(EngineError):
    code = "StorageFailure"
