"""Change-request lifecycle: priority routing, review ballots, decisions.

High-priority requests go to a global ballot of all team leaders chaired by
the owning team's leader; low-priority requests are decided locally by that
leader alone. Outcomes are approve, note (deferred, reactivatable) or
disapprove. The ballot rule is plurality with chair tie-break and a
disapprove-on-deadlock safe default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import NotALeader, NotAVoter, UnknownChangeRequest, WrongState
from .repository import ChangeLog, EventType


class CrState(str, Enum):
    SUBMITTED = "SUBMITTED"
    GLOBAL_REVIEW = "GLOBAL_REVIEW"
    LOCAL_REVIEW = "LOCAL_REVIEW"
    APPROVED = "APPROVED"
    NOTED = "NOTED"
    DISAPPROVED = "DISAPPROVED"
    APPLIED = "APPLIED"


class Vote(str, Enum):
    APPROVE = "APPROVE"
    NOTE = "NOTE"
    DISAPPROVE = "DISAPPROVE"


_VOTE_TO_STATE = {
    Vote.APPROVE: CrState.APPROVED,
    Vote.NOTE: CrState.NOTED,
    Vote.DISAPPROVE: CrState.DISAPPROVED,
}


def decide_ballot(votes: dict[str, Vote], chair_id: str) -> Vote:
    """Plurality over cast votes; chair's vote breaks ties; if the chair
    abstained or voted outside the tied set, the safe default is DISAPPROVE.
    """
    if not votes:
        return Vote.DISAPPROVE
    counts: dict[Vote, int] = {}
    for vote in votes.values():
        counts[vote] = counts.get(vote, 0) + 1
    best = max(counts.values())
    tied = [v for v, c in counts.items() if c == best]
    if len(tied) == 1:
        return tied[0]
    chair_vote = votes.get(chair_id)
    if chair_vote in tied:
        return chair_vote
    return Vote.DISAPPROVE


@dataclass
class ChangeRequest:
    cr_id: str
    artifact_id: str
    proposer_id: str
    proposed_content_hash: str
    rationale: str
    priority_class: str
    state: CrState = CrState.SUBMITTED
    chair_id: Optional[str] = None
    voter_ids: list[str] = field(default_factory=list)
    votes: dict[str, Vote] = field(default_factory=dict)
    review_deadline: Optional[int] = None
    decided_at: Optional[int] = None
    no_votes_cast: bool = False
    applied_version: Optional[int] = None
    submitted_at: int = 0

    def to_dict(self) -> dict:
        return {
            "cr_id": self.cr_id,
            "artifact_id": self.artifact_id,
            "proposer_id": self.proposer_id,
            "proposed_content_hash": self.proposed_content_hash,
            "rationale": self.rationale,
            "priority_class": self.priority_class,
            "state": self.state.value,
            "chair_id": self.chair_id,
            "voter_ids": list(self.voter_ids),
            "votes": {k: v.value for k, v in self.votes.items()},
            "review_deadline": self.review_deadline,
            "decided_at": self.decided_at,
            "no_votes_cast": self.no_votes_cast,
            "applied_version": self.applied_version,
            "submitted_at": self.submitted_at,
        }


class ChangeWorkflow:
    """State machine over change requests.

    Collaborator facts (who leads, what priority an artifact carries, what
    the current change managers are) arrive as parameters so the state
    machine itself stays swappable.
    """

    def __init__(self, log: ChangeLog, review_deadline_seconds: int = 72 * 3600):
        self.log = log
        self.review_deadline_seconds = review_deadline_seconds
        self.requests: dict[str, ChangeRequest] = {}

    def get(self, cr_id: str):
        return self.requests.get(cr_id)

    def list(self, state: Optional[CrState] = None) -> list[ChangeRequest]:
        crs = sorted(self.requests.values(), key=lambda c: c.cr_id)
        if state is not None:
            crs = [c for c in crs if c.state is state]
        return crs

    # -- lifecycle ---------------------------------------------------------------

    def submit(self, cr_id: str, proposer_id: str, artifact_id: str,
               proposed_content_hash: str, rationale: str, priority_class: str,
               now: int, reactivated: bool = False) -> ChangeRequest:
        cr = ChangeRequest(
            cr_id=cr_id,
            artifact_id=artifact_id,
            proposer_id=proposer_id,
            proposed_content_hash=proposed_content_hash,
            rationale=rationale,
            priority_class=priority_class,
            submitted_at=now,
        )
        self.requests[cr_id] = cr
        self.log.append(EventType.CR_SUBMIT, proposer_id, artifact_id, {
            "cr_id": cr_id,
            "proposed_content_hash": proposed_content_hash,
            "rationale": rationale,
            "priority_class": priority_class,
            "phase": "reactivate" if reactivated else "submit",
        }, now)
        return cr

    def route(self, cr_id: str, chair_id: str, leader_ids: list[str], now: int) -> ChangeRequest:
        cr = self._require(cr_id)
        if cr.state is not CrState.SUBMITTED:
            raise WrongState(f"{cr_id} is {cr.state.value}, not SUBMITTED")
        cr.chair_id = chair_id
        cr.review_deadline = now + self.review_deadline_seconds
        if cr.priority_class == "HIGH":
            cr.state = CrState.GLOBAL_REVIEW
            cr.voter_ids = sorted(set(leader_ids))
        else:
            cr.state = CrState.LOCAL_REVIEW
            cr.voter_ids = [chair_id]
        self.log.append(EventType.CR_DECIDE, chair_id, cr.artifact_id, {
            "cr_id": cr_id,
            "phase": "route",
            "state": cr.state.value,
            "chair_id": chair_id,
            "voter_ids": cr.voter_ids,
            "review_deadline": cr.review_deadline,
        }, now)
        return cr

    def cast_vote(self, agent_id: str, cr_id: str, vote: Vote | str, now: int) -> ChangeRequest:
        cr = self._require(cr_id)
        vote = Vote(vote)
        if cr.state not in (CrState.GLOBAL_REVIEW, CrState.LOCAL_REVIEW):
            raise WrongState(f"{cr_id} is {cr.state.value}, not under review")
        if agent_id not in cr.voter_ids:
            raise NotAVoter(f"{agent_id} is not on the ballot for {cr_id}")
        cr.votes[agent_id] = vote  # re-voting overwrites
        self.log.append(EventType.CR_DECIDE, agent_id, cr.artifact_id, {
            "cr_id": cr_id,
            "phase": "ballot",
            "vote": vote.value,
        }, now)
        if cr.state is CrState.LOCAL_REVIEW:
            self._decide(cr, _VOTE_TO_STATE[vote], now, via="local")
        return cr

    def close_review(self, cr_id: str, now: int) -> ChangeRequest:
        cr = self._require(cr_id)
        if cr.state is not CrState.GLOBAL_REVIEW:
            raise WrongState(f"{cr_id} is {cr.state.value}, not GLOBAL_REVIEW")
        all_voted = set(cr.voter_ids) <= set(cr.votes)
        deadline_passed = cr.review_deadline is not None and now >= cr.review_deadline
        if not (all_voted or deadline_passed):
            raise WrongState(f"review of {cr_id} still open: votes missing and deadline ahead")
        if not cr.votes:
            cr.no_votes_cast = True
            self._decide(cr, CrState.DISAPPROVED, now, via="deadline-no-votes")
            return cr
        outcome = decide_ballot(cr.votes, cr.chair_id)
        self._decide(cr, _VOTE_TO_STATE[outcome], now, via="ballot")
        return cr

    def _decide(self, cr: ChangeRequest, state: CrState, now: int, via: str) -> None:
        cr.state = state
        cr.decided_at = now
        self.log.append(EventType.CR_DECIDE, cr.chair_id or cr.proposer_id, cr.artifact_id, {
            "cr_id": cr.cr_id,
            "phase": "decision",
            "state": state.value,
            "via": via,
            "votes": {k: v.value for k, v in sorted(cr.votes.items())},
            "no_votes_cast": cr.no_votes_cast,
        }, now)

    def mark_applied(self, cr_id: str, version: int) -> ChangeRequest:
        cr = self._require(cr_id)
        if cr.state is not CrState.APPROVED:
            raise WrongState(f"{cr_id} is {cr.state.value}, not APPROVED")
        cr.state = CrState.APPLIED
        cr.applied_version = version
        return cr

    def reactivate(self, leader_id: str, cr_id: str, is_leader: bool,
                   priority_class: str, chair_id: str, leader_ids: list[str],
                   now: int) -> ChangeRequest:
        """Fresh submit-and-route cycle for a NOTED request; ballot cleared,
        priority re-derived by the caller (classifications may have moved).
        """
        cr = self._require(cr_id)
        if cr.state is not CrState.NOTED:
            raise WrongState(f"{cr_id} is {cr.state.value}, not NOTED")
        if not is_leader:
            raise NotALeader(f"{leader_id} is not a team leader")
        cr.state = CrState.SUBMITTED
        cr.priority_class = priority_class
        cr.votes = {}
        cr.voter_ids = []
        cr.decided_at = None
        cr.no_votes_cast = False
        self.log.append(EventType.CR_SUBMIT, leader_id, cr.artifact_id, {
            "cr_id": cr_id,
            "proposed_content_hash": cr.proposed_content_hash,
            "rationale": cr.rationale,
            "priority_class": priority_class,
            "phase": "reactivate",
        }, now)
        return self.route(cr_id, chair_id, leader_ids, now)

    def _require(self, cr_id: str) -> ChangeRequest:
        cr = self.requests.get(cr_id)
        if cr is None:
            raise UnknownChangeRequest(f"no such change request: {cr_id}")
        return cr
