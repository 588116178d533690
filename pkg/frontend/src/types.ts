// Server payload shapes, field-for-field with the inference API's JSON.

export interface ModelConfig {
  n_champions: number;
  n_items: number;
  d_model: number;
  n_heads: number;
  n_layers: number;
  dropout: number;
  ffn_dim: number | null;
  ablate_role: boolean;
  allies_only: boolean;
}

export interface MetaResponse {
  champions: string[];
  items: string[];
  roles: string[];
  config: ModelConfig;
  checkpoint_id: string | null;
}

export interface ParticipantPayload {
  champion_name: string;
  role: string;
  team: string;
}

export interface RecommendRequest {
  participants: ParticipantPayload[];
  requesting_team: string;
}

export interface AttentionRequest extends RecommendRequest {
  layer?: number;
  head?: number;
}

export interface ItemScore {
  name: string;
  probability: number;
}

export interface SlotRecommendation {
  champion_name: string;
  role: string;
  team: string;
  items: ItemScore[];
}

export interface AttentionBlock {
  rows: number[][];
  row_labels: string[];
  column_labels: string[];
}

export interface RecommendResponse {
  model_meta: { checkpoint_id: string | null; config: ModelConfig };
  requesting_team: string;
  recommendations: SlotRecommendation[];
  attention: AttentionBlock;
}

export interface AttentionMatrix {
  layer: number;
  head: number;
  weights: number[][];
}

export interface AttentionResponse {
  n_layers: number;
  n_heads: number;
  matrices: AttentionMatrix[];
  labels: string[];
}

export interface ErrorPayload {
  error: { code: string; message: string; fields: string[] };
}
