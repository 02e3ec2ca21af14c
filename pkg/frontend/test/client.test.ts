import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, SessionExpired } from "../src/client.js";

function jsonResponse(status: number, body: unknown, headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json", ...headers },
  });
}

interface Captured {
  url: string;
  init?: RequestInit;
}

function clientWith(
  response: Response | ((url: string, init?: RequestInit) => Response),
  captured: Captured[] = [],
): ApiClient {
  return new ApiClient("http://svc", "tok-lead-a", {
    fetchImpl: async (url, init) => {
      captured.push({ url, init });
      return typeof response === "function" ? response(url, init) : response;
    },
  });
}

describe("request plumbing", () => {
  it("unwraps the data envelope and tracks the log head", async () => {
    const calls: Captured[] = [];
    const client = clientWith(jsonResponse(200, { data: [{ cr_id: "cr-1" }], log_head: 17 }), calls);
    const crs = await client.listCrs({ state: "GLOBAL_REVIEW", voter: "lead-a" });
    expect(crs).toEqual([{ cr_id: "cr-1" }]);
    expect(client.lastLogHead).toBe(17);
    expect(calls[0]!.url).toBe("http://svc/crs?state=GLOBAL_REVIEW&voter=lead-a");
    const headers = calls[0]!.init?.headers as Record<string, string>;
    expect(headers.Authorization).toBe("Bearer tok-lead-a");
  });

  it("posts votes as JSON", async () => {
    const calls: Captured[] = [];
    const client = clientWith(jsonResponse(200, { data: { cr_id: "cr-1" }, log_head: 3 }), calls);
    await client.castVote("cr-1", "APPROVE");
    expect(calls[0]!.url).toBe("http://svc/crs/cr-1/vote");
    expect(calls[0]!.init?.method).toBe("POST");
    expect(JSON.parse(calls[0]!.init?.body as string)).toEqual({ vote: "APPROVE" });
  });

  it("surfaces API error envelopes with their code", async () => {
    const client = clientWith(
      jsonResponse(403, {
        error: { code: "NOT_A_VOTER", message: "dev-1 is not on the ballot", details: {} },
        log_head: 5,
      }),
    );
    const err = await client.castVote("cr-1", "APPROVE").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("NOT_A_VOTER");
    expect(err.status).toBe(403);
    expect(err.logHead).toBe(5);
    expect(client.lastLogHead).toBe(5); // rejected mutations still report head
  });

  it("maps 401 to SessionExpired", async () => {
    const client = clientWith(
      jsonResponse(401, {
        error: { code: "UNAUTHORIZED", message: "token expired", details: {} },
        log_head: 0,
      }),
    );
    await expect(client.pending()).rejects.toBeInstanceOf(SessionExpired);
  });

  it("tolerates non-JSON error bodies", async () => {
    const client = clientWith(new Response("bad gateway", { status: 502 }));
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("HTTP_ERROR");
    expect(err.status).toBe(502);
  });

  it("returns the raw export with its head position header", async () => {
    const client = clientWith((url) => {
      expect(url).toBe("http://svc/log/export");
      return new Response('{"seq":1}\n', {
        status: 200,
        headers: { "X-Log-Head": "21" },
      });
    });
    const exported = await client.exportLog();
    expect(exported.text).toBe('{"seq":1}\n');
    expect(exported.head).toBe(21);
  });
});
