"""Reactive middleware for dependable change management across sites.

Artifacts live in a content-addressed repository behind a hash-chained
event log; trace links carry change impact; subscribers get notified of
every committed change; high-priority changes go through a review ballot
before they may be applied.
"""

from .access_control import AccessControl, Capability, Grant, Privilege
from .clock import SystemClock, VirtualClock
from .cmt_workflow import ChangeRequest, ChangeWorkflow, CrState, Vote, decide_ballot
from .core_model import Directory, PriorityClass
from .deployment import Deployment, open_deployment
from .errors import MiddlewareError
from .pss import NotificationEvent, PublishSubscribe, Subscription
from .repository import (
    Artifact,
    ArtifactRepository,
    ChangeLog,
    ContentStore,
    LogEntry,
    replay_log,
)
from .trace_graph import LinkType, TraceGraph, TraceLink

__version__ = "0.1.0"

__all__ = [
    "AccessControl",
    "Artifact",
    "ArtifactRepository",
    "Capability",
    "ChangeLog",
    "ChangeRequest",
    "ChangeWorkflow",
    "ContentStore",
    "CrState",
    "Deployment",
    "Directory",
    "Grant",
    "LinkType",
    "LogEntry",
    "MiddlewareError",
    "NotificationEvent",
    "PriorityClass",
    "Privilege",
    "PublishSubscribe",
    "Subscription",
    "SystemClock",
    "TraceGraph",
    "TraceLink",
    "VirtualClock",
    "Vote",
    "decide_ballot",
    "open_deployment",
    "replay_log",
]
