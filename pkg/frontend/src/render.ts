// HTML renderers: template literals over view models, no framework. All
// dynamic text goes through escapeHtml.

import type { NotificationEvent } from "./types.js";
import { formatCountdown, type ProvenanceView, type ViewModelCR } from "./viewmodel.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const VOTE_OPTIONS = ["APPROVE", "NOTE", "DISAPPROVE"] as const;

export function renderQueueCard(vm: ViewModelCR): string {
  const votedChip = vm.myVote
    ? `<span class="chip chip-vote" data-vote="${vm.myVote}">your vote: ${vm.myVote}</span>`
    : "";
  const deadline = vm.deadlineReached
    ? `<span class="chip chip-overdue">deadline reached</span>`
    : `<span class="chip">${escapeHtml(formatCountdown(vm.countdownSeconds))}</span>`;
  const closeButton = vm.canClose
    ? `<button class="act-close" data-cr="${escapeHtml(vm.crId)}">close review</button>`
    : "";
  const ballot = vm.isVoter
    ? VOTE_OPTIONS.map(
        (v) =>
          `<button class="act-vote" data-cr="${escapeHtml(vm.crId)}" data-vote="${v}"` +
          `${vm.myVote === v ? ' data-current="1"' : ""}>${v}</button>`,
      ).join("")
    : `<span class="muted">not on this ballot</span>`;
  const impact = vm.impact.length
    ? `<div class="impact">impacts: ${vm.impact
        .map((p) => `${escapeHtml(p.artifact_id)} (${p.distance})`)
        .join(", ")}</div>`
    : "";
  return `<article class="cr-card" data-cr="${escapeHtml(vm.crId)}" data-artifact="${escapeHtml(vm.artifactId)}" data-priority="${vm.priority}">
  <header>
    <span class="chip chip-${vm.priority.toLowerCase()}">${vm.priority}</span>
    <strong>${escapeHtml(vm.crId)}</strong> on ${escapeHtml(vm.artifactId)}
    <span class="state">${vm.state}</span>
  </header>
  <p class="rationale">${escapeHtml(vm.rationale)}</p>
  <div class="meta">proposed by ${escapeHtml(vm.proposerName)}; chair ${escapeHtml(vm.chairName)};
    ballots ${vm.votesCast}/${vm.voterIds.length} ${deadline} ${votedChip}</div>
  ${impact}
  <footer>${ballot}${closeButton}</footer>
</article>`;
}

export function renderQueue(vms: ViewModelCR[]): string {
  if (vms.length === 0) return `<p class="empty">no pending change requests</p>`;
  return vms.map(renderQueueCard).join("\n");
}

export function renderProvenance(view: ProvenanceView): string {
  const badge = view.deleted ? ` <span class="chip chip-deleted">deleted</span>` : "";
  const rows = view.rows
    .map(
      (row) => `<li class="prov-node${row.isHead ? " head" : ""}" data-version="${row.element.version}">
  v${row.element.version} by ${escapeHtml(row.authorName)}
  ${
    row.element.change_request_id
      ? `<a class="prov-cr" data-cr="${escapeHtml(row.element.change_request_id)}">${escapeHtml(row.element.change_request_id)}</a>`
      : `<span class="muted">direct</span>`
  }
  <time data-ts="${row.element.timestamp}"></time>
  <span class="seq">log #${row.element.log_seq}</span>
</li>`,
    )
    .join("\n");
  return `<section class="provenance">
<h3>${escapeHtml(view.artifactId)}${badge}</h3>
<ol>${rows}</ol>
</section>`;
}

export function renderInbox(events: NotificationEvent[], names: Record<string, string>): string {
  if (events.length === 0) return `<p class="empty">inbox empty</p>`;
  const items = events
    .map((event) => {
      const impact = event.impact?.length
        ? ` <span class="impact">impact: ${event.impact
            .map(([id, d]) => `${escapeHtml(id)} (${d})`)
            .join(", ")}</span>`
        : "";
      return `<li class="note" data-event="${escapeHtml(event.event_id)}">
  ${event.event_type} on ${escapeHtml(event.artifact_id)} (log #${event.log_seq})${impact}
  <button class="act-ack" data-event="${escapeHtml(event.event_id)}">ack</button>
</li>`;
    })
    .join("\n");
  return `<ul class="inbox">${items}</ul>`;
}

export function renderAccessNotice(message: string): string {
  return `<p class="access-notice">You do not have access to this view: ${escapeHtml(message)}</p>`;
}

export function renderErrorBanner(code: string, message: string): string {
  return `<div class="banner banner-error" data-code="${escapeHtml(code)}">${escapeHtml(code)}: ${escapeHtml(message)}</div>`;
}

export function renderHead(logHead: number | null): string {
  return logHead === null ? "" : `log head #${logHead}`;
}
