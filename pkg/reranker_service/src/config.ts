export interface ServiceConfig {
  port: number;
  mode: "lexical" | "cross_encoder";
  modelName: string;
  maxBatch: number;
  maxDocChars: number;
}

function intFromEnv(name: string, fallback: number): number {
  const raw = process.env[name];
  if (raw === undefined || raw === "") return fallback;
  const value = Number.parseInt(raw, 10);
  if (!Number.isFinite(value) || value < 0) {
    throw new Error(`${name} must be a non-negative integer, got '${raw}'`);
  }
  return value;
}

export function loadConfig(): ServiceConfig {
  const mode = process.env.RERANKER_MODE ?? "lexical";
  if (mode !== "lexical" && mode !== "cross_encoder") {
    throw new Error(`RERANKER_MODE must be 'lexical' or 'cross_encoder', got '${mode}'`);
  }
  return {
    port: intFromEnv("RERANKER_PORT", 8750),
    mode,
    modelName: process.env.RERANKER_MODEL ?? "Xenova/ms-marco-MiniLM-L-6-v2",
    maxBatch: intFromEnv("RERANKER_MAX_BATCH", 256),
    maxDocChars: intFromEnv("RERANKER_MAX_DOC_CHARS", 2000),
  };
}
