// Typed client for the gateway HTTP API. Every call goes over the wire;
// no state is derived client-side beyond the session token.

export interface Session {
  token: string;
  student_id: string;
  impi: string;
  expires_s: number;
  roles: string[];
}

export interface CourseRow {
  code: string;
  title: string;
  capacity: number;
  enrolled: number;
  is_enrolled: boolean;
  schedule: { day: number; start_min: number; end_min: number }[];
}

export interface EventRow {
  id: string;
  kind: string;
  title: string;
  start: string;
  end: string;
  course_code: string | null;
}

export interface BuildingRow {
  id: string;
  number: string;
  name: string;
  lat: number;
  lon: number;
  distance_m: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public errorName: string,
    public sipStatus?: string,
  ) {
    super(`${errorName} (http ${status})`);
  }
}

async function parseError(resp: Response): Promise<never> {
  let name = "Unknown";
  let sip: string | undefined;
  try {
    const body = await resp.json();
    name = body.error ?? name;
    sip = body.sip_status;
  } catch {
    // non-JSON error body; keep the fallback name
  }
  throw new ApiError(resp.status, name, sip);
}

export class Client {
  constructor(
    public baseUrl: string,
    public token: string | null = null,
  ) {}

  private headers(): Record<string, string> {
    return this.token ? { "X-Session": this.token } : {};
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: {
        ...this.headers(),
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  async login(impi: string, k: string): Promise<Session> {
    const session = await this.request<Session>("POST", "/session", { impi, k });
    this.token = session.token;
    return session;
  }

  async logout(): Promise<void> {
    await this.request("DELETE", "/session");
    this.token = null;
  }

  courses(): Promise<CourseRow[]> {
    return this.request("GET", "/courses");
  }

  enroll(code: string): Promise<unknown> {
    return this.request("POST", `/courses/${encodeURIComponent(code)}/enrollment`);
  }

  drop(code: string): Promise<unknown> {
    return this.request("DELETE", `/courses/${encodeURIComponent(code)}/enrollment`);
  }

  events(from: string, to: string): Promise<EventRow[]> {
    const qs = new URLSearchParams({ from, to });
    return this.request("GET", `/events?${qs}`);
  }

  buildings(q: string, lat: number, lon: number): Promise<BuildingRow[]> {
    const qs = new URLSearchParams({ q, lat: String(lat), lon: String(lon) });
    return this.request("GET", `/buildings?${qs}`);
  }
}
