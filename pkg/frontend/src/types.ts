// Mirrors of the gateway's JSON payloads. The UI never invents fields:
// everything rendered comes from one of these shapes.

export interface QAPayload {
  question: string;
  answer: string;
  knowledge_ids: string[];
}

export interface TurnRecord {
  turn: number;
  status: "ok" | "failed";
  user_text: string;
  retrieved_knowledge: [string, number][];
  qa: QAPayload | null;
  enhanced_text: string;
  scene_revision: number;
  stage: string;
  backend_identities: Record<string, string>;
}

export interface SceneObject {
  asset_id: string;
  label: string;
  position: [number, number, number];
  rotation: [number, number, number];
  scale: [number, number, number];
}

export interface SceneSpec {
  objects: SceneObject[];
  environment: Record<string, string>;
  revision: number;
}

export interface GatewayErrorBody {
  stage: string;
  message: string;
  retriable: boolean;
}
