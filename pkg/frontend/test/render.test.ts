import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderErrorBanner,
  renderInbox,
  renderProvenance,
  renderQueue,
  renderQueueCard,
} from "../src/render.js";
import type { ChangeRequest } from "../src/types.js";
import { provenanceView, toViewModel, type Session } from "../src/viewmodel.js";

const NOW = 1_600_000_000;
const session: Session = { agentId: "lead-a", names: { "lead-a": "Lead A" }, now: NOW };

function cr(overrides: Partial<ChangeRequest> = {}): ChangeRequest {
  return {
    cr_id: "cr-000001",
    artifact_id: "art-000001",
    proposer_id: "dev-1",
    proposed_content_hash: "ab".repeat(32),
    rationale: "fix <script>alert(1)</script>",
    priority_class: "HIGH",
    state: "GLOBAL_REVIEW",
    chair_id: "lead-a",
    voter_ids: ["lead-a"],
    votes: {},
    review_deadline: NOW + 3600,
    decided_at: null,
    no_votes_cast: false,
    applied_version: null,
    submitted_at: NOW,
    ...overrides,
  };
}

describe("escapeHtml", () => {
  it("neutralizes markup and quotes", () => {
    expect(escapeHtml(`<b a="x" b='y'>&`)).toBe(
      "&lt;b a=&quot;x&quot; b=&#39;y&#39;&gt;&amp;",
    );
  });
});

describe("queue card", () => {
  it("escapes user text and shows ballot buttons for voters", () => {
    const html = renderQueueCard(toViewModel(cr(), session));
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain('data-vote="APPROVE"');
    expect(html).toContain('data-vote="NOTE"');
    expect(html).toContain('data-vote="DISAPPROVE"');
    expect(html).toContain('data-artifact="art-000001"');
    expect(html).toContain("1h 00m left");
  });

  it("shows the overdue chip and close action for the chair", () => {
    const html = renderQueueCard(toViewModel(cr({ review_deadline: NOW - 1 }), session));
    expect(html).toContain("deadline reached");
    expect(html).toContain("act-close");
  });

  it("tells non-voters they have no ballot", () => {
    const html = renderQueueCard(toViewModel(cr({ voter_ids: ["lead-b"] }), session));
    expect(html).toContain("not on this ballot");
    expect(html).not.toContain("act-vote");
  });

  it("marks the recorded vote", () => {
    const html = renderQueueCard(toViewModel(cr({ votes: { "lead-a": "NOTE" } }), session));
    expect(html).toContain("your vote: NOTE");
    expect(html).toContain('data-current="1"');
  });

  it("renders the empty state", () => {
    expect(renderQueue([])).toContain("no pending change requests");
  });
});

describe("provenance timeline", () => {
  const artifact = {
    artifact_id: "art-000001",
    kind: "CODE",
    owner_team_id: "team-a",
    state: "ACTIVE" as const,
    media_type: "text/plain",
    head_version: 2,
  };
  const chain = [
    { version: 1, author_id: "lead-a", change_request_id: null, timestamp: NOW, log_seq: 1 },
    { version: 2, author_id: "lead-a", change_request_id: "cr-000001", timestamp: NOW + 1, log_seq: 7 },
  ];

  it("renders one node per version with CR links", () => {
    const html = renderProvenance(provenanceView(artifact, chain, session.names));
    expect(html.match(/prov-node/g)).toHaveLength(2);
    expect(html).toContain('data-version="1"');
    expect(html).toContain('data-cr="cr-000001"');
    expect(html).toContain("log #7");
    expect(html).not.toContain("chip-deleted");
  });

  it("badges deleted artifacts", () => {
    const html = renderProvenance(
      provenanceView({ ...artifact, state: "DELETED" }, chain, {}),
    );
    expect(html).toContain("chip-deleted");
  });
});

describe("inbox and banners", () => {
  it("renders events with ack buttons and impact", () => {
    const html = renderInbox(
      [
        {
          event_id: "ev-1",
          subscriber_id: "lead-a",
          artifact_id: "art-000001",
          event_type: "MODIFY",
          log_seq: 4,
          delivered: true,
          acked: false,
          impact: [["art-000002", 1]],
        },
      ],
      session.names,
    );
    expect(html).toContain('data-event="ev-1"');
    expect(html).toContain("act-ack");
    expect(html).toContain("art-000002 (1)");
  });

  it("renders the empty inbox and error banners", () => {
    expect(renderInbox([], {})).toContain("inbox empty");
    const banner = renderErrorBanner("WRONG_STATE", "review already decided");
    expect(banner).toContain('data-code="WRONG_STATE"');
    expect(banner).toContain("review already decided");
  });
});
