import { ApiClient, ApiError, SessionPayload } from "./api.js";

// Everything the DOM layer is allowed to render. The backend hides method
// labels; this type cannot even represent one.
export interface ViewState {
  phase: "idle" | "loading" | "judging" | "complete" | "error";
  progressText: string;
  imageUrl: string | null;
  controlsEnabled: boolean;
  timeLimitMs: number | null;
  message: string;
}

type Listener = (view: ViewState) => void;

export class SessionController {
  private session: SessionPayload | null = null;
  private inFlight = false;
  private expired = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: Listener = () => {},
  ) {}

  view(): ViewState {
    if (this.session === null) {
      return {
        phase: this.inFlight ? "loading" : "idle",
        progressText: "",
        imageUrl: null,
        controlsEnabled: false,
        timeLimitMs: null,
        message: this.lastError ?? "",
      };
    }
    const s = this.session;
    if (s.complete) {
      return {
        phase: "complete",
        progressText: `${s.cursor} / ${s.k}`,
        imageUrl: null,
        controlsEnabled: false,
        timeLimitMs: null,
        message: "All images judged. Thank you!",
      };
    }
    return {
      phase: this.lastError === null ? "judging" : "error",
      progressText: `${s.cursor} / ${s.k}`,
      imageUrl: s.image_id ? this.api.imageUrl(s.image_id) : null,
      controlsEnabled: !this.inFlight && !this.expired && this.lastError === null,
      timeLimitMs: s.time_limit_ms ?? null,
      message: this.lastError ?? "",
    };
  }

  private lastError: string | null = null;

  private emit(): void {
    this.onChange(this.view());
  }

  async start(): Promise<void> {
    this.inFlight = true;
    this.lastError = null;
    this.emit();
    try {
      this.session = await this.api.createSession();
    } catch (err) {
      this.lastError = err instanceof ApiError ? err.message : String(err);
      this.session = null;
      this.inFlight = false;
      this.emit();
      return;
    }
    this.inFlight = false;
    this.armTimer();
    this.emit();
  }

  // Double submissions are swallowed here (controls disabled while a
  // request is in flight) and rejected again server-side.
  async submit(realistic: boolean): Promise<void> {
    if (!this.view().controlsEnabled) return;
    await this.send(realistic);
  }

  private async send(realistic: boolean | null): Promise<void> {
    const s = this.session;
    if (s === null || s.complete || !s.image_id) return;
    this.inFlight = true;
    this.emit();
    try {
      this.session = await this.api.submitJudgment(s.session_id, s.image_id, realistic);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // duplicate or out-of-order: resynchronize from the backend
        this.session = await this.api.current(s.session_id);
      } else {
        this.lastError = err instanceof ApiError ? err.message : String(err);
      }
    }
    this.inFlight = false;
    this.expired = false;
    this.armTimer();
    this.emit();
  }

  private armTimer(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const s = this.session;
    if (s === null || s.complete || s.time_limit_ms == null) return;
    this.timer = setTimeout(() => void this.onExpiry(), s.time_limit_ms);
  }

  private async onExpiry(): Promise<void> {
    // lock the controls, then record the item as skipped
    this.expired = true;
    this.emit();
    await this.send(null);
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer);
  }
}
