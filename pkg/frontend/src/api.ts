/** Typed client for the corpus service JSON API. */

export const SCHEMA_VERSION = 1;

export interface KbEntity {
  kind: "kb";
  kb_id: string;
  label: string;
  description: string;
  matched_via: string;
  url: string;
}

export interface EncyclopediaEntity {
  kind: "encyclopedia";
  label: string;
  url: string;
  corpus_id: string;
  doc_id: string;
}

export type Entity = KbEntity | EncyclopediaEntity;

export interface SentenceHit {
  ordinal: number;
  text: string;
  /** Character ranges [start, end), ascending and non-overlapping. */
  highlights: ReadonlyArray<readonly [number, number]>;
}

export interface DocumentCard {
  doc_id: string;
  title: string;
  source_url: string;
  truncated: boolean;
  sentences: SentenceHit[];
}

export interface CorpusSection {
  corpus_id: string;
  documents: DocumentCard[];
}

export interface SearchResponse {
  schema_version: number;
  query: string;
  entities: Entity[];
  per_corpus: CorpusSection[];
  warnings: string[];
}

export interface CorpusInfo {
  id: string;
  display_name: string;
  documents: number;
  sentences: number;
}

export interface HealthInfo {
  status: string;
  index_built_at: string;
  linker: string;
}

/** Server reachable but the request failed (4xx/5xx body). */
export class ApiError extends Error {}

/** Payload does not match the documented response shape. */
export class SchemaError extends Error {}

function fail(path: string, expected: string): never {
  throw new SchemaError(`${path}: expected ${expected}`);
}

function record(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(path, "an object");
  }
  return value as Record<string, unknown>;
}

function str(value: unknown, path: string): string {
  if (typeof value !== "string") fail(path, "a string");
  return value;
}

function int(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    fail(path, "an integer");
  }
  return value;
}

function bool(value: unknown, path: string): boolean {
  if (typeof value !== "boolean") fail(path, "a boolean");
  return value;
}

function list(value: unknown, path: string): unknown[] {
  if (!Array.isArray(value)) fail(path, "an array");
  return value;
}

function parseEntity(value: unknown, path: string): Entity {
  const raw = record(value, path);
  const kind = str(raw.kind, `${path}.kind`);
  if (kind === "kb") {
    return {
      kind,
      kb_id: str(raw.kb_id, `${path}.kb_id`),
      label: str(raw.label, `${path}.label`),
      description: str(raw.description, `${path}.description`),
      matched_via: str(raw.matched_via, `${path}.matched_via`),
      url: str(raw.url, `${path}.url`),
    };
  }
  if (kind === "encyclopedia") {
    return {
      kind,
      label: str(raw.label, `${path}.label`),
      url: str(raw.url, `${path}.url`),
      corpus_id: str(raw.corpus_id, `${path}.corpus_id`),
      doc_id: str(raw.doc_id, `${path}.doc_id`),
    };
  }
  fail(`${path}.kind`, '"kb" or "encyclopedia"');
}

function parseSentence(value: unknown, path: string): SentenceHit {
  const raw = record(value, path);
  const text = str(raw.text, `${path}.text`);
  const highlights = list(raw.highlights, `${path}.highlights`).map((pair, i) => {
    const hp = `${path}.highlights[${i}]`;
    const cells = list(pair, hp);
    if (cells.length !== 2) fail(hp, "a [start, end] pair");
    const start = int(cells[0], `${hp}[0]`);
    const end = int(cells[1], `${hp}[1]`);
    if (start < 0 || end <= start || end > text.length) {
      fail(hp, `a range within 0..${text.length}`);
    }
    return [start, end] as const;
  });
  return { ordinal: int(raw.ordinal, `${path}.ordinal`), text, highlights };
}

function parseDocument(value: unknown, path: string): DocumentCard {
  const raw = record(value, path);
  return {
    doc_id: str(raw.doc_id, `${path}.doc_id`),
    title: str(raw.title, `${path}.title`),
    source_url: str(raw.source_url, `${path}.source_url`),
    truncated: bool(raw.truncated, `${path}.truncated`),
    sentences: list(raw.sentences, `${path}.sentences`).map((s, i) =>
      parseSentence(s, `${path}.sentences[${i}]`),
    ),
  };
}

export function parseSearchResponse(value: unknown): SearchResponse {
  const raw = record(value, "response");
  const version = int(raw.schema_version, "response.schema_version");
  if (version !== SCHEMA_VERSION) {
    fail("response.schema_version", `${SCHEMA_VERSION}`);
  }
  return {
    schema_version: version,
    query: str(raw.query, "response.query"),
    entities: list(raw.entities, "response.entities").map((e, i) =>
      parseEntity(e, `response.entities[${i}]`),
    ),
    per_corpus: list(raw.per_corpus, "response.per_corpus").map((c, i) => {
      const path = `response.per_corpus[${i}]`;
      const section = record(c, path);
      return {
        corpus_id: str(section.corpus_id, `${path}.corpus_id`),
        documents: list(section.documents, `${path}.documents`).map((d, j) =>
          parseDocument(d, `${path}.documents[${j}]`),
        ),
      };
    }),
    warnings:
      raw.warnings === undefined
        ? []
        : list(raw.warnings, "response.warnings").map((w, i) =>
            str(w, `response.warnings[${i}]`),
          ),
  };
}

export function parseCorpora(value: unknown): CorpusInfo[] {
  return list(value, "corpora").map((c, i) => {
    const path = `corpora[${i}]`;
    const raw = record(c, path);
    return {
      id: str(raw.id, `${path}.id`),
      display_name: str(raw.display_name, `${path}.display_name`),
      documents: int(raw.documents, `${path}.documents`),
      sentences: int(raw.sentences, `${path}.sentences`),
    };
  });
}

export function parseHealth(value: unknown): HealthInfo {
  const raw = record(value, "health");
  return {
    status: str(raw.status, "health.status"),
    index_built_at: str(raw.index_built_at, "health.index_built_at"),
    linker: str(raw.linker, "health.linker"),
  };
}

/** Minimal slice of fetch() the client needs; injectable for tests. */
export type FetchLike = (
  url: string,
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ApiClient {
  constructor(
    private readonly fetchImpl: FetchLike,
    private readonly base = "",
  ) {}

  private async get(path: string): Promise<unknown> {
    const response = await this.fetchImpl(this.base + path);
    let body: unknown;
    try {
      body = await response.json();
    } catch {
      throw new SchemaError(`${path}: response is not JSON`);
    }
    if (response.status !== 200) {
      const message =
        typeof body === "object" && body !== null && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${response.status}`;
      throw new ApiError(message);
    }
    return body;
  }

  async search(query: string): Promise<SearchResponse> {
    const body = await this.get(`/api/search?q=${encodeURIComponent(query)}`);
    return parseSearchResponse(body);
  }

  async corpora(): Promise<CorpusInfo[]> {
    return parseCorpora(await this.get("/api/corpora"));
  }

  async health(): Promise<HealthInfo> {
    return parseHealth(await this.get("/api/health"));
  }
}
