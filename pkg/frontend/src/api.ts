/** Typed client for the flowrag service endpoints. */

export interface WorkflowStepObj {
  name: string;
  order: number;
  parent: number | null;
  properties: Record<string, string>;
}

export interface WorkflowDoc {
  trigger: WorkflowStepObj | null;
  steps: WorkflowStepObj[];
}

export interface ScoredName {
  name: string;
  score: number;
}

export interface RetrievePayload {
  steps: ScoredName[];
  tables: ScoredName[];
}

export interface GeneratePayload {
  workflow: WorkflowDoc | null;
  suggestions: { steps: string[]; tables: string[] };
  hallucinated_steps: string[];
  hallucinated_tables: string[];
  valid: boolean;
  raw: string;
}

export interface CatalogStep {
  name: string;
  category: string;
  description: string;
  requires_table: boolean;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new Error(`${path} failed: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) {
      throw new Error(`${path} failed: HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.get("/health");
  }

  catalogSteps(): Promise<CatalogStep[]> {
    return this.get("/catalog/steps");
  }

  catalogTables(): Promise<string[]> {
    return this.get("/catalog/tables");
  }

  retrieve(query: string, kSteps?: number, kTables?: number): Promise<RetrievePayload> {
    return this.post("/retrieve", { query, k_steps: kSteps, k_tables: kTables });
  }

  generate(query: string): Promise<GeneratePayload> {
    return this.post("/generate", { query });
  }
}
