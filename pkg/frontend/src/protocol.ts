// Wire types and client for the sync service's three endpoints.

export type HtmlNode =
  | { text: string }
  | { tag: string; attrs: [string, string][]; children: HtmlNode[] };

export interface RunResponse {
  ok: boolean;
  value?: string;
  htmlTree?: HtmlNode;
  error?: string;
  line?: number;
  col?: number;
}

export interface SolutionEntry {
  code: string;
  summary: string;
  outputPreview: string;
  previewTree?: HtmlNode;
}

export interface UpdateResponse {
  ok: boolean;
  inSync?: boolean;
  solutions?: SolutionEntry[];
  error?: string;
}

export interface ExampleInfo {
  id: string;
  title: string;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SyncClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return (await res.json()) as T;
  }

  run(code: string): Promise<RunResponse> {
    return this.post<RunResponse>("/api/run", { code });
  }

  update(code: string, newOutput: string): Promise<UpdateResponse> {
    return this.post<UpdateResponse>("/api/update", { code, newOutput });
  }

  async examples(): Promise<ExampleInfo[]> {
    const res = await this.fetchImpl(this.baseUrl + "/api/examples");
    return (await res.json()) as ExampleInfo[];
  }

  async example(id: string): Promise<{ id: string; code: string }> {
    const res = await this.fetchImpl(this.baseUrl + "/api/examples/" + id);
    if (!res.ok) throw new Error(`unknown example ${id}`);
    return (await res.json()) as { id: string; code: string };
  }
}
