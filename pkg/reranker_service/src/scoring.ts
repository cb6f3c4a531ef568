export interface ScoreDoc {
  doc_id: string;
  doc_text: string;
}

export interface ScoreOutcome {
  scores: Record<string, number>;
  truncated: string[];
  unscored: string[];
}

export function tokenize(text: string): string[] {
  return text.toLowerCase().split(/[^0-9a-z]+/).filter((t) => t.length > 0);
}

/**
 * Degenerate scoring mode needing no model: the fraction of unique query
 * tokens present in the document, with a small term-frequency bonus so
 * richer matches separate. Deterministic and symmetric: identical texts
 * always receive identical scores.
 */
export function lexicalOverlapScore(queryText: string, docText: string): number {
  const queryTokens = Array.from(new Set(tokenize(queryText)));
  if (queryTokens.length === 0) return 0;
  const docTokens = tokenize(docText);
  if (docTokens.length === 0) return 0;
  const counts = new Map<string, number>();
  for (const token of docTokens) {
    counts.set(token, (counts.get(token) ?? 0) + 1);
  }
  let covered = 0;
  let bonus = 0;
  for (const token of queryTokens) {
    const tf = counts.get(token) ?? 0;
    if (tf > 0) {
      covered += 1;
      bonus += tf / (tf + 1) / docTokens.length;
    }
  }
  return covered / queryTokens.length + bonus;
}

export type PairScorer = (queryText: string, docText: string) => Promise<number>;

/**
 * Score a batch. Documents longer than `maxDocChars` are truncated before
 * scoring and reported in `truncated`; documents with no text to score are
 * omitted from `scores` and reported in `unscored` so the client applies
 * its missing-score fallback.
 */
export async function scoreBatch(
  queryText: string,
  docs: ScoreDoc[],
  maxDocChars: number,
  scorer: PairScorer,
): Promise<ScoreOutcome> {
  const scores: Record<string, number> = {};
  const truncated: string[] = [];
  const unscored: string[] = [];
  for (const doc of docs) {
    let text = doc.doc_text;
    if (text.length > maxDocChars) {
      text = text.slice(0, maxDocChars);
      truncated.push(doc.doc_id);
    }
    if (text.trim().length === 0) {
      unscored.push(doc.doc_id);
      continue;
    }
    scores[doc.doc_id] = await scorer(queryText, text);
  }
  return { scores, truncated, unscored };
}

export const lexicalScorer: PairScorer = async (queryText, docText) =>
  lexicalOverlapScore(queryText, docText);

/**
 * Cross-encoder scorer over a pretrained passage-reranking model. The
 * transformers package is loaded lazily and is not a hard dependency; when
 * it (or the model weights) cannot be loaded the caller surfaces a
 * model_unavailable error and the lexical mode remains fully functional.
 */
export async function loadCrossEncoder(modelName: string): Promise<PairScorer> {
  const transformers = await import("@huggingface/transformers" as string);
  const pipe = await transformers.pipeline("text-classification", modelName);
  return async (queryText: string, docText: string) => {
    const output = await pipe(
      [{ text: queryText, text_pair: docText }],
      { function_to_apply: "sigmoid" },
    );
    const first = Array.isArray(output) ? output[0] : output;
    const item = Array.isArray(first) ? first[0] : first;
    return typeof item?.score === "number" ? item.score : 0;
  };
}
