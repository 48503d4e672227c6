// Typed client for the study backend. The payloads deliberately carry no
// method metadata; this module is the only network surface of the UI.

export interface SessionPayload {
  v: number;
  session_id: string;
  k: number;
  cursor: number;
  complete: boolean;
  image_id?: string;
  time_limit_ms?: number;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<SessionPayload> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `backend unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as SessionPayload;
  }

  createSession(): Promise<SessionPayload> {
    return this.request("/api/v1/sessions", { method: "POST" });
  }

  current(sessionId: string): Promise<SessionPayload> {
    return this.request(`/api/v1/sessions/${sessionId}/current`);
  }

  // realistic: true/false is a judgment; null marks a timed-out skip
  submitJudgment(
    sessionId: string,
    imageId: string,
    realistic: boolean | null,
  ): Promise<SessionPayload> {
    return this.request(`/api/v1/sessions/${sessionId}/judgments`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ v: 1, image_id: imageId, realistic }),
    });
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/v1/images/${imageId}`;
  }
}
