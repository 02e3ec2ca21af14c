"""Error hierarchy shared by every subsystem.

Each error carries a stable ``code`` string so the API layer can map it
into the uniform error envelope without string-matching messages.
"""

from __future__ import annotations


class MiddlewareError(Exception):
    """Base class for all engine errors."""

    code = "MIDDLEWARE_ERROR"
    http_status = 400

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    def to_envelope(self) -> dict:
        return {"code": self.code, "message": self.message, "details": self.details}


class ConfigInvalid(MiddlewareError):
    code = "CONFIG_INVALID"


class Unauthorized(MiddlewareError):
    code = "UNAUTHORIZED"
    http_status = 401


# Lookup failures -----------------------------------------------------------

class NotFoundError(MiddlewareError):
    http_status = 404


class UnknownSite(NotFoundError):
    code = "UNKNOWN_SITE"


class UnknownTeam(NotFoundError):
    code = "UNKNOWN_TEAM"


class UnknownAgent(NotFoundError):
    code = "UNKNOWN_AGENT"


class UnknownProject(NotFoundError):
    code = "UNKNOWN_PROJECT"


class UnknownRequirement(NotFoundError):
    code = "UNKNOWN_REQUIREMENT"


class UnknownArtifact(NotFoundError):
    code = "UNKNOWN_ARTIFACT"


class UnknownVersion(NotFoundError):
    code = "UNKNOWN_VERSION"


class UnknownLink(NotFoundError):
    code = "UNKNOWN_LINK"


class UnknownSubscription(NotFoundError):
    code = "UNKNOWN_SUBSCRIPTION"


class UnknownEvent(NotFoundError):
    code = "UNKNOWN_EVENT"


class UnknownLogSeq(NotFoundError):
    code = "UNKNOWN_LOG_SEQ"


class UnknownChangeRequest(NotFoundError):
    code = "UNKNOWN_CHANGE_REQUEST"


# Domain rule violations ----------------------------------------------------

class ToolCannotLead(MiddlewareError):
    code = "TOOL_CANNOT_LEAD"


class NotATeamMember(MiddlewareError):
    code = "NOT_A_TEAM_MEMBER"


class EmptyAttributeSet(MiddlewareError):
    code = "EMPTY_ATTRIBUTE_SET"


class OutOfRange(MiddlewareError):
    code = "OUT_OF_RANGE"


class IllegalPhaseTransition(MiddlewareError):
    code = "ILLEGAL_PHASE_TRANSITION"
    http_status = 409


class DuplicateId(MiddlewareError):
    code = "DUPLICATE_ID"
    http_status = 409


class PrivilegeDenied(MiddlewareError):
    code = "PRIVILEGE_DENIED"
    http_status = 403


class NotALeader(MiddlewareError):
    code = "NOT_A_LEADER"
    http_status = 403


class ApprovalRequired(MiddlewareError):
    code = "APPROVAL_REQUIRED"
    http_status = 409


class ArtifactDeleted(MiddlewareError):
    code = "ARTIFACT_DELETED"
    http_status = 409


class AlreadyDeleted(MiddlewareError):
    code = "ALREADY_DELETED"
    http_status = 409


class NotDeleted(MiddlewareError):
    code = "NOT_DELETED"
    http_status = 409


class StaleParent(MiddlewareError):
    code = "STALE_PARENT"
    http_status = 409


class ChainBroken(MiddlewareError):
    code = "CHAIN_BROKEN"

    def __init__(self, message: str = "", seq: int | None = None, **details):
        if seq is not None:
            details["seq"] = seq
        super().__init__(message, **details)
        self.seq = seq


class OutOfOrder(MiddlewareError):
    code = "OUT_OF_ORDER"


class SelfLoop(MiddlewareError):
    code = "SELF_LOOP"


class DuplicateLink(MiddlewareError):
    code = "DUPLICATE_LINK"
    http_status = 409


class DuplicateSubscription(MiddlewareError):
    code = "DUPLICATE_SUBSCRIPTION"
    http_status = 409


class WrongState(MiddlewareError):
    code = "WRONG_STATE"
    http_status = 409


class NotAVoter(MiddlewareError):
    code = "NOT_A_VOTER"
    http_status = 403


class PathUnreadable(MiddlewareError):
    code = "PATH_UNREADABLE"


class ScriptParseError(MiddlewareError):
    code = "SCRIPT_PARSE_ERROR"


class UnresolvedSymbol(MiddlewareError):
    code = "UNRESOLVED_SYMBOL"
