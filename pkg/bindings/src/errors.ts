/** Typed error raised for every non-2xx service response. */
export class EngineError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "EngineError";
    this.code = code;
    this.status = status;
  }
}

export async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let code = "engine_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string; detail?: unknown };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
    else if (body.detail) message = JSON.stringify(body.detail);
  } catch {
    // Non-JSON error body; keep the defaults.
  }
  throw new EngineError(code, message, response.status);
}
