// Wire types mirrored from the middleware's HTTP API. The UI is a read-only
// projection of these: every mutation goes back through the API.

export type Priority = "HIGH" | "LOW";

export type CrState =
  | "SUBMITTED"
  | "LOCAL_REVIEW"
  | "GLOBAL_REVIEW"
  | "APPROVED"
  | "NOTED"
  | "DISAPPROVED"
  | "APPLIED";

export type VoteValue = "APPROVE" | "NOTE" | "DISAPPROVE";

export interface ChangeRequest {
  cr_id: string;
  artifact_id: string;
  proposer_id: string;
  proposed_content_hash: string;
  rationale: string;
  priority_class: Priority;
  state: CrState;
  chair_id: string | null;
  voter_ids: string[];
  votes: Record<string, VoteValue>;
  review_deadline: number | null;
  decided_at: number | null;
  no_votes_cast: boolean;
  applied_version: number | null;
  submitted_at: number;
}

export interface Artifact {
  artifact_id: string;
  kind: string;
  owner_team_id: string;
  state: "ACTIVE" | "DELETED";
  media_type: string;
  head_version: number;
}

/** One element of an artifact's provenance chain, rendered verbatim. */
export interface ProvenanceElement {
  version: number;
  author_id: string;
  change_request_id: string | null;
  timestamp: number;
  log_seq: number;
}

export interface ImpactPair {
  artifact_id: string;
  distance: number;
}

export interface NotificationEvent {
  event_id: string;
  subscriber_id: string;
  artifact_id: string;
  event_type: string;
  log_seq: number;
  delivered: boolean;
  acked: boolean;
  impact: [string, number][] | null;
}

export interface Agent {
  agent_id: string;
  kind: "HUMAN" | "TOOL";
  display_name: string;
  team_id: string | null;
  is_team_leader: boolean;
}

export interface LogEntry {
  seq: number;
  event_type: string;
  actor_id: string;
  subject_id: string;
  payload: Record<string, unknown>;
  prev_hash: string;
  timestamp: number;
  entry_hash: string;
}

/** A line of the NDJSON notification stream. */
export interface StreamLine {
  type: "head" | "event";
  log_head: number;
  event?: NotificationEvent;
}

export interface ErrorEnvelope {
  error: { code: string; message: string; details: Record<string, unknown> };
  log_head: number;
}
