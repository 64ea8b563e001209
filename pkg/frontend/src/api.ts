/** Typed client for the hdlrag HTTP service. All backend traffic goes
 * through this module; nothing else in the UI issues requests. */

export interface RetrievedDoc {
  doc_id: string;
  module_name: string;
  relevance: number;
  distance?: number;
  text?: string;
  evicted?: boolean;
}

export interface Trace {
  reason: string;
  halted_at: number | null;
  drops: number[];
}

export interface RetrieveResponse {
  retrieved: RetrievedDoc[];
  trace: Trace;
}

export interface GenerateResponse {
  code: string;
  source: string;
  warnings: string[];
  retrieved: RetrievedDoc[];
  trace: Trace;
  timings: Record<string, number>;
}

export interface HealthResponse {
  index_size: number;
  dim: number;
  providers: string[];
}

export interface RetrievalOverrides {
  mode?: string;
  tau?: number;
  alpha?: number;
  k_max?: number;
  pool_size?: number;
}

export interface GenerationOverrides {
  temperature?: number;
  top_p?: number;
  max_new_tokens?: number;
}

export interface GenerateRequest {
  query: string;
  provider?: string;
  session_api_key?: string;
  retrieval?: RetrievalOverrides;
  generation?: GenerationOverrides;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly fields: string[] = [],
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raise(status: number, response: Response): Promise<never> {
  let detail = `request failed with status ${status}`;
  let fields: string[] = [];
  try {
    const body = (await response.json()) as { detail?: string; fields?: string[] };
    if (typeof body.detail === "string") detail = body.detail;
    if (Array.isArray(body.fields)) fields = body.fields;
  } catch {
    // non-JSON error body: keep the generic message
  }
  throw new ApiError(status, detail, fields);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) await raise(response.status, response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>("/health");
  }

  retrieve(query: string, retrieval?: RetrievalOverrides): Promise<RetrieveResponse> {
    return this.post<RetrieveResponse>("/retrieve", { query, retrieval });
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.post<GenerateResponse>("/generate", req);
  }
}
