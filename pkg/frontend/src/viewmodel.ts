// Pure projections from API data to what the dashboard shows. Nothing in
// here talks to the network or the DOM, so the queue ordering and vote
// reconciliation rules are testable without a browser.

import type {
  Artifact,
  ChangeRequest,
  ImpactPair,
  NotificationEvent,
  Priority,
  ProvenanceElement,
  VoteValue,
} from "./types.js";

export interface Session {
  agentId: string;
  /** agent_id -> display_name, from GET /agents. */
  names: Record<string, string>;
  /** Epoch seconds, the client's view of "now". */
  now: number;
}

export interface ViewModelCR {
  crId: string;
  artifactId: string;
  priority: Priority;
  state: ChangeRequest["state"];
  rationale: string;
  proposerId: string;
  proposerName: string;
  chairId: string | null;
  chairName: string;
  voterIds: string[];
  votesCast: number;
  myVote: VoteValue | null;
  isVoter: boolean;
  deadline: number | null;
  countdownSeconds: number | null;
  deadlineReached: boolean;
  /** Chairs may close an expired global review from the card. */
  canClose: boolean;
  impact: ImpactPair[];
}

const PENDING_STATES = new Set(["LOCAL_REVIEW", "GLOBAL_REVIEW"]);

export function displayName(names: Record<string, string>, agentId: string | null): string {
  if (agentId === null) return "";
  return names[agentId] ?? agentId;
}

export function toViewModel(
  cr: ChangeRequest,
  session: Session,
  impact: ImpactPair[] = [],
): ViewModelCR {
  const countdown = cr.review_deadline === null ? null : cr.review_deadline - session.now;
  const deadlineReached = countdown !== null && countdown <= 0;
  const isVoter = cr.voter_ids.includes(session.agentId);
  return {
    crId: cr.cr_id,
    artifactId: cr.artifact_id,
    priority: cr.priority_class,
    state: cr.state,
    rationale: cr.rationale,
    proposerId: cr.proposer_id,
    proposerName: displayName(session.names, cr.proposer_id),
    chairId: cr.chair_id,
    chairName: displayName(session.names, cr.chair_id),
    voterIds: [...cr.voter_ids],
    votesCast: Object.keys(cr.votes).length,
    myVote: cr.votes[session.agentId] ?? null,
    isVoter,
    deadline: cr.review_deadline,
    countdownSeconds: countdown,
    deadlineReached,
    canClose:
      deadlineReached && cr.state === "GLOBAL_REVIEW" && cr.chair_id === session.agentId,
    impact,
  };
}

function queueRank(vm: ViewModelCR): number {
  // HIGH CRs in global review where this agent must vote come first.
  if (vm.priority === "HIGH" && vm.state === "GLOBAL_REVIEW" && vm.isVoter) return 0;
  return 1;
}

const PRIORITY_RANK: Record<Priority, number> = { HIGH: 0, LOW: 1 };

/** Pending-CR queue for one agent, ordered by (ballot duty, priority,
 *  deadline, id). Decided CRs never appear. */
export function buildQueue(
  crs: ChangeRequest[],
  session: Session,
  impacts: Record<string, ImpactPair[]> = {},
): ViewModelCR[] {
  return crs
    .filter((cr) => PENDING_STATES.has(cr.state))
    .map((cr) => toViewModel(cr, session, impacts[cr.artifact_id] ?? []))
    .sort((a, b) => {
      if (queueRank(a) !== queueRank(b)) return queueRank(a) - queueRank(b);
      if (PRIORITY_RANK[a.priority] !== PRIORITY_RANK[b.priority]) {
        return PRIORITY_RANK[a.priority] - PRIORITY_RANK[b.priority];
      }
      const da = a.deadline ?? Number.MAX_SAFE_INTEGER;
      const db = b.deadline ?? Number.MAX_SAFE_INTEGER;
      if (da !== db) return da - db;
      return a.crId < b.crId ? -1 : a.crId > b.crId ? 1 : 0;
    });
}

/** The agent's ballot duty: pending CRs they are empaneled on. */
export function ballotQueue(
  crs: ChangeRequest[],
  session: Session,
  impacts: Record<string, ImpactPair[]> = {},
): ViewModelCR[] {
  return buildQueue(crs, session, impacts).filter((vm) => vm.isVoter);
}

/** Optimistic ballot update: reflect the vote locally before the server
 *  confirms. Reconciliation with the API response is the source of truth. */
export function applyVote(vm: ViewModelCR, vote: VoteValue): ViewModelCR {
  const firstVote = vm.myVote === null;
  return {
    ...vm,
    myVote: vote,
    votesCast: firstVote ? vm.votesCast + 1 : vm.votesCast,
  };
}

/** Replace optimistic state with whatever the server echoed back. Two tabs
 *  voting differently converge here: last write wins on the server. */
export function reconcile(
  serverCr: ChangeRequest,
  session: Session,
  impact: ImpactPair[] = [],
): ViewModelCR {
  return toViewModel(serverCr, session, impact);
}

export interface ProvenanceRow {
  /** The API element, kept verbatim: the timeline renders exactly what the
   *  server attests, field for field. */
  element: ProvenanceElement;
  authorName: string;
  isHead: boolean;
}

export interface ProvenanceView {
  artifactId: string;
  deleted: boolean;
  rows: ProvenanceRow[];
}

export function provenanceView(
  artifact: Artifact,
  chain: ProvenanceElement[],
  names: Record<string, string>,
): ProvenanceView {
  return {
    artifactId: artifact.artifact_id,
    deleted: artifact.state === "DELETED",
    rows: chain.map((element, i) => ({
      element,
      authorName: displayName(names, element.author_id),
      isHead: i === chain.length - 1,
    })),
  };
}

/** Notification inbox, newest first; acked events are filtered out by the
 *  server already but tolerate them for optimistic ack rendering. */
export function inboxView(events: NotificationEvent[]): NotificationEvent[] {
  return events
    .filter((event) => !event.acked)
    .slice()
    .sort((a, b) => b.log_seq - a.log_seq);
}

export function formatCountdown(seconds: number | null): string {
  if (seconds === null) return "no deadline";
  if (seconds <= 0) return "deadline reached";
  const hours = Math.floor(seconds / 3600);
  const minutes = Math.floor((seconds % 3600) / 60);
  if (hours > 0) return `${hours}h ${String(minutes).padStart(2, "0")}m left`;
  if (minutes > 0) return `${minutes}m left`;
  return `${seconds}s left`;
}
