import {
  ApiError,
  ApiErrorDetail,
  AttributeInfo,
  GenerateRequest,
  GenerateResponse,
  SweepRequest,
  SweepResponse,
} from './types.js';

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the service's three endpoints. */
export class StudioClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async getAttributes(): Promise<AttributeInfo[]> {
    const body = await this.request('GET', '/attributes');
    return (body as { attributes: AttributeInfo[] }).attributes;
  }

  async generate(req: GenerateRequest): Promise<GenerateResponse> {
    return (await this.request('POST', '/generate', req)) as GenerateResponse;
  }

  async sweep(req: SweepRequest): Promise<SweepResponse> {
    return (await this.request('POST', '/sweep', req)) as SweepResponse;
  }

  private async request(method: string, path: string, payload?: unknown): Promise<unknown> {
    const init: RequestInit = { method, headers: { 'content-type': 'application/json' } };
    if (payload !== undefined) {
      init.body = JSON.stringify(payload);
    }
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const text = await resp.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = null;
    }
    if (!resp.ok) {
      const detail = extractDetail(body, resp.status);
      throw new ApiError(resp.status, detail);
    }
    return body;
  }
}

function extractDetail(body: unknown, status: number): ApiErrorDetail {
  if (body && typeof body === 'object' && 'detail' in body) {
    const detail = (body as { detail: unknown }).detail;
    if (detail && typeof detail === 'object') {
      const d = detail as Record<string, unknown>;
      return {
        message: typeof d.message === 'string' ? d.message : JSON.stringify(detail),
        attribute: typeof d.attribute === 'string' ? d.attribute : undefined,
        min: typeof d.min === 'number' ? d.min : undefined,
        max: typeof d.max === 'number' ? d.max : undefined,
        position: typeof d.position === 'number' ? d.position : undefined,
      };
    }
    // FastAPI validation errors arrive as a list of objects.
    if (Array.isArray(detail)) {
      const msg = detail
        .map((item) => (item && typeof item === 'object' && 'msg' in item ? String(item.msg) : ''))
        .filter(Boolean)
        .join('; ');
      return { message: msg || `invalid request (${status})` };
    }
    return { message: String(detail) };
  }
  return { message: `service error ${status}` };
}
