"""Publish/Subscribe System: subscription registry and notification fan-out.

Delivery contract: at-least-once transport, exactly-once consumer surface.
Event ids are deterministic digests of (log seq, subscriber) so re-delivery
of the same underlying change collapses onto one notification record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import (
    DuplicateSubscription,
    UnknownAgent,
    UnknownEvent,
    UnknownLogSeq,
    UnknownSubscription,
)
from .repository import ChangeLog, EventType
from .util import sha256_hex


def notification_event_id(log_seq: int, subscriber_id: str) -> str:
    return sha256_hex(f"{log_seq}:{subscriber_id}".encode("utf-8"))[:32]


@dataclass
class Subscription:
    subscription_id: str
    agent_id: str
    artifact_id: str
    include_link_closure: bool
    created_at: int

    def to_dict(self) -> dict:
        return {
            "subscription_id": self.subscription_id,
            "agent_id": self.agent_id,
            "artifact_id": self.artifact_id,
            "include_link_closure": self.include_link_closure,
            "created_at": self.created_at,
        }


@dataclass
class NotificationEvent:
    event_id: str
    subscriber_id: str
    artifact_id: str
    event_type: str
    log_seq: int
    delivered: bool = True
    acked: bool = False
    impact: Optional[list] = None  # [(artifact_id, distance)] for CR-applied changes

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "subscriber_id": self.subscriber_id,
            "artifact_id": self.artifact_id,
            "event_type": self.event_type,
            "log_seq": self.log_seq,
            "delivered": self.delivered,
            "acked": self.acked,
            "impact": self.impact,
        }


class PublishSubscribe:
    def __init__(self, log: ChangeLog,
                 impact_fn: Callable[[str], list[tuple[str, int]]],
                 agent_exists: Callable[[str], bool]):
        self.log = log
        self._impact = impact_fn
        self._agent_exists = agent_exists
        self._subs: dict[str, Subscription] = {}
        self._by_pair: dict[tuple[str, str], str] = {}
        self._events: dict[str, NotificationEvent] = {}
        self._listeners: list[Callable[[NotificationEvent], None]] = []

    def add_listener(self, fn: Callable[[NotificationEvent], None]) -> None:
        self._listeners.append(fn)

    def remove_listener(self, fn: Callable[[NotificationEvent], None]) -> None:
        if fn in self._listeners:
            self._listeners.remove(fn)

    # -- subscriptions -----------------------------------------------------------

    def subscribe(self, subscription_id: str, agent_id: str, artifact_id: str,
                  include_link_closure: bool, now: int, auto: bool = False) -> Subscription:
        if (agent_id, artifact_id) in self._by_pair:
            raise DuplicateSubscription(f"{agent_id} already subscribes to {artifact_id}")
        sub = Subscription(subscription_id, agent_id, artifact_id, include_link_closure, now)
        self._subs[subscription_id] = sub
        self._by_pair[(agent_id, artifact_id)] = subscription_id
        self.log.append(EventType.SUBSCRIBE, agent_id, artifact_id, {
            "subscription_id": subscription_id,
            "include_link_closure": include_link_closure,
            "auto": auto,
        }, now)
        return sub

    def unsubscribe(self, subscription_id: str, now: int) -> Subscription:
        sub = self._subs.get(subscription_id)
        if sub is None:
            raise UnknownSubscription(f"no such subscription: {subscription_id}")
        del self._subs[subscription_id]
        del self._by_pair[(sub.agent_id, sub.artifact_id)]
        self.log.append(EventType.UNSUBSCRIBE, sub.agent_id, sub.artifact_id, {
            "subscription_id": subscription_id,
        }, now)
        return sub

    def apply_subscription(self, sub: Subscription) -> None:
        """Install a subscription without logging (replay/import path)."""
        self._subs[sub.subscription_id] = sub
        self._by_pair[(sub.agent_id, sub.artifact_id)] = sub.subscription_id

    def apply_unsubscription(self, subscription_id: str) -> None:
        sub = self._subs.pop(subscription_id, None)
        if sub is not None:
            self._by_pair.pop((sub.agent_id, sub.artifact_id), None)

    def apply_notification(self, event: NotificationEvent) -> None:
        """Install a delivered notification without logging (replay path)."""
        self._events[event.event_id] = event

    def subscription_for(self, agent_id: str, artifact_id: str) -> Optional[Subscription]:
        sub_id = self._by_pair.get((agent_id, artifact_id))
        return self._subs.get(sub_id) if sub_id else None

    def subscriptions(self) -> list[Subscription]:
        return sorted(self._subs.values(), key=lambda s: s.subscription_id)

    # -- fan-out ---------------------------------------------------------------

    def subscriber_set(self, artifact_id: str) -> set[str]:
        """Direct subscribers plus closure subscribers of impacted artifacts."""
        direct = {s.agent_id for s in self._subs.values() if s.artifact_id == artifact_id}
        impacted = {aid for aid, _ in self._impact(artifact_id)}
        closure = {
            s.agent_id
            for s in self._subs.values()
            if s.include_link_closure and s.artifact_id in impacted
        }
        return direct | closure

    def fan_out(self, log_seq: int) -> list[NotificationEvent]:
        """Create one notification per distinct subscriber of a change entry.

        The change author is excluded. Re-fanning an already-processed seq
        is a no-op per subscriber thanks to deterministic event ids.
        """
        entry = self.log.get(log_seq)
        if entry.event_type.value not in ("CREATE", "MODIFY", "DELETE", "RECALL"):
            raise UnknownLogSeq(f"seq {log_seq} is not a change entry")
        artifact_id = entry.subject_id
        subscribers = self.subscriber_set(artifact_id) - {entry.actor_id}
        impact = None
        if entry.payload.get("change_request_id"):
            impact = [[aid, dist] for aid, dist in self._impact(artifact_id)]
        created = []
        for agent_id in sorted(subscribers):
            event_id = notification_event_id(log_seq, agent_id)
            if event_id in self._events:
                continue
            event = NotificationEvent(
                event_id=event_id,
                subscriber_id=agent_id,
                artifact_id=artifact_id,
                event_type=entry.event_type.value,
                log_seq=log_seq,
                impact=impact,
            )
            self._events[event_id] = event
            self.log.append(EventType.NOTIFY, agent_id, artifact_id, {
                "event_id": event_id,
                "subscriber_id": agent_id,
                "change_seq": log_seq,
                "change_type": entry.event_type.value,
                "impact": impact,
            }, entry.timestamp)
            for fn in self._listeners:
                fn(event)
            created.append(event)
        return created

    # -- delivery bookkeeping -----------------------------------------------------

    def ack(self, event_id: str, now: Optional[int] = None) -> NotificationEvent:
        event = self._events.get(event_id)
        if event is None:
            raise UnknownEvent(f"no such event: {event_id}")
        if not event.acked:
            # Logged so acknowledgement state survives a restart; re-acking
            # an already-acked event is a no-op and appends nothing.
            event.acked = True
            self.log.append(
                event_type=EventType.ACK,
                actor_id=event.subscriber_id,
                subject_id=event.artifact_id,
                payload={"event_id": event.event_id, "subscriber_id": event.subscriber_id},
                timestamp=now if now is not None else 0,
            )
        return event

    def apply_ack(self, event_id: str) -> None:
        """Replay helper: mark an event acked without logging."""
        event = self._events.get(event_id)
        if event is not None:
            event.acked = True

    def pending(self, agent_id: str) -> list[NotificationEvent]:
        if not self._agent_exists(agent_id):
            raise UnknownAgent(f"no such agent: {agent_id}")
        return sorted(
            (e for e in self._events.values() if e.subscriber_id == agent_id and not e.acked),
            key=lambda e: e.log_seq,
        )

    def events(self) -> list[NotificationEvent]:
        return sorted(self._events.values(), key=lambda e: (e.log_seq, e.subscriber_id))
