import express, { type Express, type Request, type Response } from "express";

import type { ServiceConfig } from "./config.js";
import {
  lexicalScorer,
  loadCrossEncoder,
  scoreBatch,
  type PairScorer,
  type ScoreDoc,
} from "./scoring.js";

interface ValidatedRequest {
  queryText: string;
  docs: ScoreDoc[];
}

function badRequest(res: Response, code: string, message: string): void {
  res.status(400).json({ error: { code, message } });
}

function validateScoreRequest(body: unknown): ValidatedRequest | string {
  if (typeof body !== "object" || body === null) {
    return "body must be a JSON object";
  }
  const payload = body as Record<string, unknown>;
  if (typeof payload.query_text !== "string" || payload.query_text.length === 0) {
    return "query_text must be a non-empty string";
  }
  if (!Array.isArray(payload.docs)) {
    return "docs must be an array of {doc_id, doc_text}";
  }
  const docs: ScoreDoc[] = [];
  const seen = new Set<string>();
  for (const [index, entry] of payload.docs.entries()) {
    if (typeof entry !== "object" || entry === null) {
      return `docs[${index}] must be an object`;
    }
    const doc = entry as Record<string, unknown>;
    if (typeof doc.doc_id !== "string" || doc.doc_id.length === 0) {
      return `docs[${index}].doc_id must be a non-empty string`;
    }
    if (typeof doc.doc_text !== "string") {
      return `docs[${index}].doc_text must be a string`;
    }
    if (seen.has(doc.doc_id)) {
      return `duplicate doc_id '${doc.doc_id}'`;
    }
    seen.add(doc.doc_id);
    docs.push({ doc_id: doc.doc_id, doc_text: doc.doc_text });
  }
  return { queryText: payload.query_text, docs };
}

export function createApp(config: ServiceConfig): Express {
  const app = express();
  app.use(express.json({ limit: "8mb" }));

  let scorer: PairScorer | null = config.mode === "lexical" ? lexicalScorer : null;
  let scorerError: string | null = null;
  let loading: Promise<void> | null = null;

  async function ensureScorer(): Promise<PairScorer | null> {
    if (scorer) return scorer;
    if (scorerError) return null;
    loading ??= loadCrossEncoder(config.modelName)
      .then((loaded) => {
        scorer = loaded;
      })
      .catch((err: Error) => {
        scorerError = err.message;
        loading = null;
      });
    await loading;
    return scorer;
  }

  app.get("/health", (_req: Request, res: Response) => {
    res.json({
      status: "ok",
      service: "reranker-service",
      mode: config.mode,
      model: config.mode === "cross_encoder" ? config.modelName : null,
      max_batch: config.maxBatch,
      timestamp: new Date().toISOString(),
    });
  });

  app.post("/score", async (req: Request, res: Response) => {
    const validated = validateScoreRequest(req.body);
    if (typeof validated === "string") {
      badRequest(res, "invalid_request", validated);
      return;
    }
    if (validated.docs.length === 0) {
      badRequest(res, "empty_batch", "docs must contain at least one document");
      return;
    }
    if (validated.docs.length > config.maxBatch) {
      badRequest(
        res,
        "batch_too_large",
        `batch of ${validated.docs.length} exceeds max ${config.maxBatch}`,
      );
      return;
    }
    const active = await ensureScorer();
    if (!active) {
      res.status(503).json({
        error: {
          code: "model_unavailable",
          message: `cross-encoder '${config.modelName}' could not be loaded`,
        },
      });
      return;
    }
    const outcome = await scoreBatch(
      validated.queryText,
      validated.docs,
      config.maxDocChars,
      active,
    );
    res.json({
      scores: outcome.scores,
      truncated: outcome.truncated,
      unscored: outcome.unscored,
      mode: config.mode,
    });
  });

  return app;
}
