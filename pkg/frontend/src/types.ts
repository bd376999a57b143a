// Wire types matching the inference service's JSON API.

export interface AttributeInfo {
  name: string;
  min: number;
  max: number;
  periodic: boolean;
  grid_size: number;
}

export type NegativeMode = 'null_text' | 'identity';

export interface GenerateRequest {
  template: string;
  attributes: Record<string, number>;
  seed: number;
  steps: number;
  guidance_scale: number;
  negative_mode: NegativeMode;
}

export interface GenerateMetadata {
  seed: number;
  steps: number;
  guidance_scale: number;
  negative_mode: NegativeMode;
  template: string;
  attributes: Record<string, number>;
  elapsed_seconds: number;
}

export interface GenerateResponse {
  image: string; // base64 PNG
  metadata: GenerateMetadata;
}

export interface SweepRequest extends GenerateRequest {
  sweep_attribute: string;
  from: number;
  to: number;
  frames: number;
}

export interface SweepFrame {
  value: number;
  image: string;
}

export interface SweepResponse {
  frames: SweepFrame[];
  metadata: Record<string, unknown>;
}

export interface ApiErrorDetail {
  message: string;
  attribute?: string;
  min?: number;
  max?: number;
  position?: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: ApiErrorDetail,
  ) {
    super(detail.message ?? `service error ${status}`);
    this.name = 'ApiError';
  }
}
