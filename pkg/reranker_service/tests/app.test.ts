import type { Server } from "node:http";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp } from "../src/app.js";
import type { ServiceConfig } from "../src/config.js";

const config: ServiceConfig = {
  port: 0,
  mode: "lexical",
  modelName: "unused-in-lexical-mode",
  maxBatch: 4,
  maxDocChars: 50,
};

let server: Server;
let baseUrl: string;

beforeAll(async () => {
  const app = createApp(config);
  await new Promise<void>((resolve) => {
    server = app.listen(0, "127.0.0.1", resolve);
  });
  const address = server.address();
  if (typeof address !== "object" || !address) throw new Error("no address");
  baseUrl = `http://127.0.0.1:${address.port}`;
});

afterAll(async () => {
  await new Promise<void>((resolve, reject) =>
    server.close((err) => (err ? reject(err) : resolve())),
  );
});

async function score(body: unknown): Promise<Response> {
  return fetch(`${baseUrl}/score`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

describe("GET /health", () => {
  it("reports status and mode", async () => {
    const res = await fetch(`${baseUrl}/health`);
    expect(res.status).toBe(200);
    const body = await res.json();
    expect(body.status).toBe("ok");
    expect(body.mode).toBe("lexical");
    expect(body.service).toBe("reranker-service");
  });
});

describe("POST /score", () => {
  it("returns one finite score per scorable doc, field names per contract", async () => {
    const res = await score({
      query_text: "alpha beta",
      docs: [
        { doc_id: "d1", doc_text: "alpha beta extras" },
        { doc_id: "d2", doc_text: "alpha only" },
      ],
    });
    expect(res.status).toBe(200);
    const body = await res.json();
    expect(Object.keys(body.scores).sort()).toEqual(["d1", "d2"]);
    for (const value of Object.values(body.scores)) {
      expect(typeof value).toBe("number");
      expect(Number.isFinite(value)).toBe(true);
    }
    expect(body.scores.d1).toBeGreaterThan(body.scores.d2);
  });

  it("identical requests yield identical responses", async () => {
    const payload = {
      query_text: "alpha beta gamma",
      docs: [
        { doc_id: "a", doc_text: "alpha beta gamma" },
        { doc_id: "b", doc_text: "gamma beta" },
      ],
    };
    const first = await (await score(payload)).json();
    const second = await (await score(payload)).json();
    expect(second).toEqual(first);
  });

  it("duplicate doc texts receive equal scores", async () => {
    const res = await score({
      query_text: "shared tokens",
      docs: [
        { doc_id: "x", doc_text: "shared tokens here" },
        { doc_id: "y", doc_text: "shared tokens here" },
      ],
    });
    const body = await res.json();
    expect(body.scores.x).toBe(body.scores.y);
  });

  it("empty doc list is an empty_batch error", async () => {
    const res = await score({ query_text: "q", docs: [] });
    expect(res.status).toBe(400);
    const body = await res.json();
    expect(body.error.code).toBe("empty_batch");
  });

  it("oversized docs are truncated with a flag", async () => {
    const res = await score({
      query_text: "alpha",
      docs: [{ doc_id: "big", doc_text: "alpha ".repeat(100) }],
    });
    const body = await res.json();
    expect(body.truncated).toEqual(["big"]);
  });

  it("unscorable docs are omitted and listed", async () => {
    const res = await score({
      query_text: "alpha",
      docs: [
        { doc_id: "d1", doc_text: "alpha" },
        { doc_id: "blank", doc_text: " " },
      ],
    });
    const body = await res.json();
    expect(Object.keys(body.scores)).toEqual(["d1"]);
    expect(body.unscored).toEqual(["blank"]);
  });

  it("rejects batches above the configured limit", async () => {
    const docs = Array.from({ length: 5 }, (_, i) => ({
      doc_id: `d${i}`,
      doc_text: "text",
    }));
    const res = await score({ query_text: "q", docs });
    expect(res.status).toBe(400);
    const body = await res.json();
    expect(body.error.code).toBe("batch_too_large");
  });

  it("rejects malformed requests with a named reason", async () => {
    const missingQuery = await score({ docs: [{ doc_id: "d", doc_text: "t" }] });
    expect(missingQuery.status).toBe(400);
    expect((await missingQuery.json()).error.code).toBe("invalid_request");

    const duplicate = await score({
      query_text: "q",
      docs: [
        { doc_id: "d", doc_text: "a" },
        { doc_id: "d", doc_text: "b" },
      ],
    });
    expect(duplicate.status).toBe(400);
    expect((await duplicate.json()).error.message).toContain("duplicate");
  });
});

describe("cross-encoder mode", () => {
  it("degrades to model_unavailable when the model cannot load", async () => {
    const ceApp = createApp({
      ...config,
      mode: "cross_encoder",
      modelName: "definitely/not-a-real-model",
    });
    const ceServer: Server = await new Promise((resolve) => {
      const s = ceApp.listen(0, "127.0.0.1", () => resolve(s));
    });
    try {
      const address = ceServer.address();
      if (typeof address !== "object" || !address) throw new Error("no address");
      const res = await fetch(`http://127.0.0.1:${address.port}/score`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          query_text: "q",
          docs: [{ doc_id: "d", doc_text: "t" }],
        }),
      });
      expect(res.status).toBe(503);
      const body = await res.json();
      expect(body.error.code).toBe("model_unavailable");
    } finally {
      await new Promise<void>((resolve, reject) =>
        ceServer.close((err) => (err ? reject(err) : resolve())),
      );
    }
  });
});
