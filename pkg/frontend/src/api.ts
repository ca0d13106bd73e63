// Typed client for the vizflow render service. The studio never computes a
// render locally: every pixel shown comes from POST /render.

export interface RenderStats {
  schemaVersion: number;
  kPlanned: number;
  kObserved: number;
  perRowMax: number;
  sortPasses: number;
  certifiedDataLinear: boolean;
  tableLength: number;
  totalAccesses: number;
}

export interface SchemaAttr {
  name: string;
  type: "numeric" | "text";
}

export interface RenderRequest {
  program: string;
  data?: string;
  dataset?: string;
  rows?: number;
  seed?: number;
  width?: number;
  height?: number;
  outputs?: string[];
  useCache?: boolean;
  usePlan?: boolean;
}

export interface RenderResponse {
  svg?: string;
  text?: string;
  stats?: RenderStats;
  diagnostics: string[];
}

export interface ValidateResponse {
  diagnostics: string[];
  schema?: SchemaAttr[];
}

export interface GalleryEntry {
  name: string;
  title: string;
  program: string;
  dataset: string;
  defaultRows: number;
}

export interface ApiResult<T> {
  ok: boolean;
  status: number;
  body: T;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post<T>(path: string, payload: unknown): Promise<ApiResult<T>> {
    const res = await this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = (await res.json()) as T;
    return { ok: res.ok, status: res.status, body };
  }

  render(req: RenderRequest): Promise<ApiResult<RenderResponse>> {
    return this.post<RenderResponse>("/render", req);
  }

  validate(req: {
    program: string;
    data?: string;
    dataset?: string;
  }): Promise<ApiResult<ValidateResponse>> {
    return this.post<ValidateResponse>("/validate", req);
  }

  async gallery(): Promise<GalleryEntry[]> {
    const res = await this.fetchFn(this.base + "/gallery");
    if (!res.ok) throw new Error(`gallery listing failed: ${res.status}`);
    return (await res.json()) as GalleryEntry[];
  }

  async galleryData(name: string, rows?: number): Promise<string> {
    const q = rows ? `?rows=${rows}` : "";
    const res = await this.fetchFn(`${this.base}/gallery/${name}/data.csv${q}`);
    if (!res.ok) throw new Error(`dataset fetch failed: ${res.status}`);
    return res.text();
  }
}
