import type {
  Agent,
  Artifact,
  ChangeRequest,
  ErrorEnvelope,
  ImpactPair,
  NotificationEvent,
  ProvenanceElement,
  VoteValue,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
    public logHead: number | null = null,
    public details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 401: the token is missing, unknown or expired. The app reacts with a
 *  re-authentication prompt rather than an error banner. */
export class SessionExpired extends ApiError {
  constructor(message: string, logHead: number | null = null) {
    super("UNAUTHORIZED", message, 401, logHead);
    this.name = "SessionExpired";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  fetchImpl?: FetchLike;
}

/** Thin typed wrapper over the middleware API. Unwraps the
 *  `{data, log_head}` envelope and keeps the last seen log head around so
 *  views can show how far behind the server they are. */
export class ApiClient {
  lastLogHead: number | null = null;
  private fetchImpl: FetchLike;

  constructor(
    public baseUrl: string,
    private token: string,
    options: ClientOptions = {},
  ) {
    this.fetchImpl = options.fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: {
        Authorization: `Bearer ${this.token}`,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      ...(body !== undefined ? { body: JSON.stringify(body) } : {}),
    });

    if (!response.ok) {
      let envelope: ErrorEnvelope | undefined;
      try {
        envelope = (await response.json()) as ErrorEnvelope;
      } catch {
        // non-JSON error body; fall back to the status line
      }
      const logHead = envelope?.log_head ?? null;
      if (envelope?.log_head !== undefined) this.lastLogHead = envelope.log_head;
      if (response.status === 401) {
        throw new SessionExpired(envelope?.error.message ?? "session expired", logHead);
      }
      throw new ApiError(
        envelope?.error.code ?? "HTTP_ERROR",
        envelope?.error.message ?? `HTTP ${response.status}`,
        response.status,
        logHead,
        envelope?.error.details ?? {},
      );
    }

    const payload = (await response.json()) as { data: T; log_head: number };
    this.lastLogHead = payload.log_head;
    return payload.data;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  listAgents(): Promise<Agent[]> {
    return this.request("GET", "/agents");
  }

  listCrs(params: { state?: string; voter?: string } = {}): Promise<ChangeRequest[]> {
    const query = new URLSearchParams();
    if (params.state) query.set("state", params.state);
    if (params.voter) query.set("voter", params.voter);
    const suffix = query.toString() ? `?${query.toString()}` : "";
    return this.request("GET", `/crs${suffix}`);
  }

  getCr(crId: string): Promise<ChangeRequest> {
    return this.request("GET", `/crs/${crId}`);
  }

  submitCr(artifactId: string, content: string, rationale: string): Promise<ChangeRequest> {
    return this.request("POST", "/crs", {
      artifact_id: artifactId,
      content,
      rationale,
    });
  }

  routeCr(crId: string): Promise<ChangeRequest> {
    return this.request("POST", `/crs/${crId}/route`);
  }

  castVote(crId: string, vote: VoteValue): Promise<ChangeRequest> {
    return this.request("POST", `/crs/${crId}/vote`, { vote });
  }

  closeReview(crId: string): Promise<ChangeRequest> {
    return this.request("POST", `/crs/${crId}/close`);
  }

  applyCr(crId: string): Promise<{ artifact_id: string; version: number }> {
    return this.request("POST", `/crs/${crId}/apply`);
  }

  readArtifact(artifactId: string): Promise<Artifact> {
    return this.request("GET", `/artifacts/${artifactId}`);
  }

  provenance(artifactId: string): Promise<ProvenanceElement[]> {
    return this.request("GET", `/artifacts/${artifactId}/provenance`);
  }

  impact(artifactId: string, depth?: number): Promise<ImpactPair[]> {
    const suffix = depth !== undefined ? `?depth=${depth}` : "";
    return this.request("GET", `/artifacts/${artifactId}/impact${suffix}`);
  }

  pending(): Promise<NotificationEvent[]> {
    return this.request("GET", "/notifications/pending");
  }

  ack(eventId: string): Promise<NotificationEvent> {
    return this.request("POST", `/notifications/${eventId}/ack`);
  }

  createArtifact(kind: string, ownerTeamId: string, content: string): Promise<Artifact> {
    return this.request("POST", "/artifacts", {
      kind,
      owner_team_id: ownerTeamId,
      content,
    });
  }

  commitVersion(artifactId: string, content: string): Promise<{ version: number }> {
    return this.request("POST", `/artifacts/${artifactId}/commit`, { content });
  }

  link(fromArtifact: string, toArtifact: string, linkType: string): Promise<{ link_id: string }> {
    return this.request("POST", "/links", {
      from_artifact: fromArtifact,
      to_artifact: toArtifact,
      link_type: linkType,
    });
  }

  assignPrivilege(agentId: string, scope: string, privilege: string): Promise<unknown> {
    return this.request("POST", "/privileges", {
      agent_id: agentId,
      scope,
      privilege,
    });
  }

  registerRequirement(artifactId: string): Promise<{ requirement_id: string }> {
    return this.request("POST", "/requirements", { artifact_id: artifactId });
  }

  classifyRequirement(requirementId: string, attributes: string[]): Promise<unknown> {
    return this.request("POST", `/requirements/${requirementId}/classify`, { attributes });
  }

  /** Full audit log as NDJSON text plus the head position the server
   *  asserts in the X-Log-Head header. */
  async exportLog(): Promise<{ text: string; head: number | null }> {
    const response = await this.fetchImpl(`${this.baseUrl}/log/export`, {
      headers: { Authorization: `Bearer ${this.token}` },
    });
    if (!response.ok) {
      if (response.status === 401) throw new SessionExpired("session expired");
      throw new ApiError("HTTP_ERROR", `HTTP ${response.status}`, response.status);
    }
    const header = response.headers.get("x-log-head");
    return {
      text: await response.text(),
      head: header === null ? null : Number(header),
    };
  }
}
