// Browser entry point: wires the API client, the live feed and the
// renderers onto the page. All decision logic lives in viewmodel.ts; this
// file only moves data and reacts to clicks.

import { ApiClient, ApiError, SessionExpired } from "./client.js";
import {
  renderErrorBanner,
  renderHead,
  renderInbox,
  renderProvenance,
  renderQueue,
} from "./render.js";
import { startLiveFeed, type LiveFeed } from "./stream.js";
import type { ImpactPair, VoteValue } from "./types.js";
import {
  applyVote,
  ballotQueue,
  buildQueue,
  inboxView,
  provenanceView,
  type Session,
  type ViewModelCR,
} from "./viewmodel.js";

interface Elements {
  login: HTMLElement;
  queue: HTMLElement;
  inbox: HTMLElement;
  provenance: HTMLElement;
  banner: HTMLElement;
  head: HTMLElement;
}

function grab(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

class Dashboard {
  private client!: ApiClient;
  private session!: Session;
  private feed: LiveFeed | null = null;
  private queue: ViewModelCR[] = [];

  constructor(private el: Elements, private baseUrl: string) {}

  promptLogin(notice = ""): void {
    this.feed?.stop();
    this.el.login.innerHTML = `
      ${notice ? renderErrorBanner("UNAUTHORIZED", notice) : ""}
      <form id="login-form">
        <input id="token" type="password" placeholder="access token" required />
        <button type="submit">sign in</button>
      </form>`;
    this.el.login.hidden = false;
    const form = this.el.login.querySelector("#login-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const token = (form.querySelector("#token") as HTMLInputElement).value.trim();
      if (token) void this.start(token);
    });
  }

  async start(token: string): Promise<void> {
    this.client = new ApiClient(this.baseUrl, token);
    try {
      const agents = await this.client.listAgents();
      const me = await this.whoAmI(token);
      this.session = {
        agentId: me,
        names: Object.fromEntries(agents.map((a) => [a.agent_id, a.display_name])),
        now: Math.floor(Date.now() / 1000),
      };
    } catch (err) {
      this.promptLogin(err instanceof SessionExpired ? "session expired" : String(err));
      return;
    }
    this.el.login.hidden = true;
    await this.refresh();
    this.feed = startLiveFeed(this.baseUrl, token, {
      onHead: (head) => {
        this.el.head.textContent = renderHead(head);
      },
      onEvent: () => void this.refresh(),
      onPoll: () => this.refresh(),
    });
  }

  /** The API has no whoami endpoint. Shipped configurations mint tokens as
   *  "tok-<agent>"; outside that convention, ask. */
  private async whoAmI(token: string): Promise<string> {
    if (token.startsWith("tok-")) return token.slice(4);
    const field = window.prompt("agent id for this token?") ?? "";
    if (!field) throw new ApiError("UNKNOWN_AGENT", "agent id required", 400);
    return field;
  }

  async refresh(): Promise<void> {
    try {
      this.session.now = Math.floor(Date.now() / 1000);
      const [crs, pending] = await Promise.all([this.client.listCrs(), this.client.pending()]);
      const impacts: Record<string, ImpactPair[]> = {};
      for (const cr of crs) {
        if (cr.state !== "LOCAL_REVIEW" && cr.state !== "GLOBAL_REVIEW") continue;
        if (!(cr.artifact_id in impacts)) {
          try {
            impacts[cr.artifact_id] = await this.client.impact(cr.artifact_id);
          } catch {
            impacts[cr.artifact_id] = [];
          }
        }
      }
      const mine = ballotQueue(crs, this.session, impacts);
      const rest = buildQueue(crs, this.session, impacts).filter((vm) => !vm.isVoter);
      this.queue = [...mine, ...rest];
      this.el.queue.innerHTML = renderQueue(this.queue);
      this.el.inbox.innerHTML = renderInbox(inboxView(pending), this.session.names);
      this.el.head.textContent = renderHead(this.client.lastLogHead);
      this.el.banner.innerHTML = "";
    } catch (err) {
      this.surface(err);
    }
  }

  async vote(crId: string, vote: VoteValue): Promise<void> {
    const idx = this.queue.findIndex((vm) => vm.crId === crId);
    if (idx >= 0) {
      // optimistic: show the chip immediately, reconcile with the echo
      this.queue[idx] = applyVote(this.queue[idx]!, vote);
      this.el.queue.innerHTML = renderQueue(this.queue);
    }
    try {
      await this.client.castVote(crId, vote);
    } catch (err) {
      this.surface(err);
    }
    await this.refresh();
  }

  async close(crId: string): Promise<void> {
    try {
      await this.client.closeReview(crId);
    } catch (err) {
      this.surface(err);
    }
    await this.refresh();
  }

  async ackEvent(eventId: string): Promise<void> {
    try {
      await this.client.ack(eventId);
    } catch (err) {
      this.surface(err);
    }
    await this.refresh();
  }

  async showProvenance(artifactId: string): Promise<void> {
    try {
      const [artifact, chain] = await Promise.all([
        this.client.readArtifact(artifactId),
        this.client.provenance(artifactId),
      ]);
      this.el.provenance.innerHTML = renderProvenance(
        provenanceView(artifact, chain, this.session.names),
      );
    } catch (err) {
      this.surface(err);
    }
  }

  private surface(err: unknown): void {
    if (err instanceof SessionExpired) {
      this.promptLogin("session expired");
      return;
    }
    if (err instanceof ApiError) {
      this.el.banner.innerHTML = renderErrorBanner(err.code, err.message);
      return;
    }
    this.el.banner.innerHTML = renderErrorBanner("CLIENT", String(err));
  }
}

export function bootstrap(): void {
  const el: Elements = {
    login: grab("login"),
    queue: grab("queue"),
    inbox: grab("inbox"),
    provenance: grab("provenance"),
    banner: grab("banner"),
    head: grab("head"),
  };
  const baseUrl = (window as { RM_ADDR?: string }).RM_ADDR ?? "";
  const app = new Dashboard(el, baseUrl);

  document.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.matches(".act-vote")) {
      void app.vote(target.dataset.cr!, target.dataset.vote as VoteValue);
      return;
    }
    if (target.matches(".act-close")) {
      void app.close(target.dataset.cr!);
      return;
    }
    if (target.matches(".act-ack")) {
      void app.ackEvent(target.dataset.event!);
      return;
    }
    const card = target.closest(".cr-card") as HTMLElement | null;
    if (card?.dataset.artifact) void app.showProvenance(card.dataset.artifact);
  });

  app.promptLogin();
}

if (typeof document !== "undefined" && document.getElementById("queue")) {
  bootstrap();
}
