import { describe, expect, it } from "vitest";

import { loadCrossEncoder } from "../src/scoring.js";

// Real-model checks need the optional transformers package plus downloaded
// weights; they run only when RERANKER_CE_TEST points at a model id.
const modelName = process.env.RERANKER_CE_TEST ?? "";

describe.skipIf(modelName === "")("cross-encoder scoring", () => {
  it(
    "ranks a doc containing the query verbatim above a same-length other doc",
    { timeout: 120_000 },
    async () => {
      const scorer = await loadCrossEncoder(modelName);
      const query = "symptoms of angular cheilitis";
      const docA =
        "common symptoms of angular cheilitis include cracked mouth corners";
      const docB =
        "common steps of planting tomato seedlings include watering deeply";
      const scoreA = await scorer(query, docA);
      const scoreB = await scorer(query, docB);
      expect(scoreA).toBeGreaterThan(scoreB);
    },
  );

  it("is deterministic for identical inputs", { timeout: 120_000 }, async () => {
    const scorer = await loadCrossEncoder(modelName);
    const first = await scorer("query text", "candidate passage");
    const second = await scorer("query text", "candidate passage");
    expect(first).toBe(second);
  });
});
