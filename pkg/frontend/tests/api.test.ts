import { describe, expect, it } from "vitest";
import { ApiClient, ApiError } from "../src/api.js";

interface Call {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: unknown;
}

function fakeFetch(
  respond: (url: string) => { status?: number; body: unknown },
): { calls: Call[]; fetch: (url: string, init?: RequestInit) => Promise<Response> } {
  const calls: Call[] = [];
  return {
    calls,
    fetch: async (url, init) => {
      calls.push({
        url,
        method: init?.method ?? "GET",
        headers: (init?.headers ?? {}) as Record<string, string>,
        body: init?.body ? JSON.parse(init.body as string) : null,
      });
      const { status = 200, body } = respond(url);
      return {
        ok: status < 400,
        status,
        statusText: status === 200 ? "OK" : "Error",
        json: async () => body,
      } as unknown as Response;
    },
  };
}

describe("request mapping", () => {
  it("POSTs engagement creation with the documented body keys", async () => {
    const { calls, fetch } = fakeFetch(() => ({
      body: { engagement_id: "eng-1", status: "created", tasks: [] },
    }));
    const api = new ApiClient("", fetch);
    const response = await api.createEngagement({ workflow_id: "pitch-memo", ticker: "NVDA", seed: 7 });
    expect(response.engagement_id).toBe("eng-1");
    expect(calls[0].url).toBe("/engagements");
    expect(calls[0].method).toBe("POST");
    expect(calls[0].headers["Content-Type"]).toBe("application/json");
    expect(calls[0].body).toEqual({ workflow_id: "pitch-memo", ticker: "NVDA", seed: 7 });
  });

  it("POSTs resume against the engagement id", async () => {
    const { calls, fetch } = fakeFetch(() => ({
      body: { engagement_id: "eng-9", status: "resuming" },
    }));
    const api = new ApiClient("", fetch);
    await api.resumeEngagement("eng-9");
    expect(calls[0].url).toBe("/engagements/eng-9/resume");
    expect(calls[0].method).toBe("POST");
  });

  it("POSTs the hire manifest to /personas", async () => {
    const { calls, fetch } = fakeFetch(() => ({ body: { id: "tester" } }));
    const api = new ApiClient("", fetch);
    await api.hirePersona({ id: "tester", name: "Tester" });
    expect(calls[0].url).toBe("/personas");
    expect(calls[0].body).toEqual({ id: "tester", name: "Tester" });
  });

  it("prefixes a configured base path", async () => {
    const { calls, fetch } = fakeFetch(() => ({ body: { ok: true, artifacts: 0 } }));
    const api = new ApiClient("/api", fetch);
    await api.health();
    expect(calls[0].url).toBe("/api/healthz");
    expect(api.eventsUrl("eng-1")).toBe("/api/engagements/eng-1/events");
  });

  it("escapes path parameters", async () => {
    const { calls, fetch } = fakeFetch(() => ({
      body: { ticker: "A B", views: [] },
    }));
    const api = new ApiClient("", fetch);
    await api.compare("A B");
    expect(calls[0].url).toBe("/graph/tickers/A%20B/compare");
  });
});

describe("envelope unwrapping", () => {
  it("unwraps list envelopes", async () => {
    const { fetch } = fakeFetch((url) => {
      if (url === "/personas") return { body: { personas: [{ id: "buffett" }] } };
      if (url === "/graph/gaps") return { body: { gaps: [{ ticker: "MSFT", personas: ["quant"] }] } };
      if (url === "/workflows") return { body: { workflows: [{ id: "pitch-memo" }] } };
      if (url === "/data-sources") return { body: { sources: [{ id: "edgar" }] } };
      if (url === "/engagements") return { body: { engagements: [{ engagement_id: "eng-1" }] } };
      return { body: { ticker: "NVDA", views: [{ persona: "quant" }] } };
    });
    const api = new ApiClient("", fetch);
    expect((await api.listPersonas())[0].id).toBe("buffett");
    expect((await api.gaps())[0].ticker).toBe("MSFT");
    expect((await api.listWorkflows())[0].id).toBe("pitch-memo");
    expect((await api.listDataSources())[0].id).toBe("edgar");
    expect((await api.listEngagements())[0].engagement_id).toBe("eng-1");
    expect((await api.compare("NVDA"))[0].persona).toBe("quant");
  });
});

describe("error mapping", () => {
  it("raises ApiError with the engine's code and detail", async () => {
    const { fetch } = fakeFetch(() => ({
      status: 400,
      body: { error: "validation", detail: "no data source can serve ticker ZZZZ" },
    }));
    const api = new ApiClient("", fetch);
    const error = await api.graph().catch((e: unknown) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect((error as ApiError).code).toBe("validation");
    expect((error as ApiError).status).toBe(400);
    expect((error as ApiError).message).toContain("ZZZZ");
  });

  it("falls back to the HTTP status for non-JSON errors", async () => {
    const fetch = async () =>
      ({
        ok: false,
        status: 502,
        statusText: "Bad Gateway",
        json: async () => {
          throw new Error("not json");
        },
      }) as unknown as Response;
    const api = new ApiClient("", fetch);
    const error = await api.health().catch((e: unknown) => e);
    expect((error as ApiError).code).toBe("http-502");
    expect((error as ApiError).message).toBe("Bad Gateway");
  });
});
