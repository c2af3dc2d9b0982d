// Session state as a pure reducer over gateway responses.
//
// Invariants: only server-confirmed state is rendered (no optimistic
// updates), and at most one request per session is in flight. Replaying
// the same sequence of events always reproduces the same state.

import type { GatewayErrorBody, SceneSpec, TurnRecord } from "./types.js";

export interface UISessionState {
  sessionId: string | null;
  turns: TurnRecord[];
  scene: SceneSpec | null;
  selectedRevision: number | null;
  pending: boolean;
  error: GatewayErrorBody | null;
}

export type UIEvent =
  | { kind: "session-created"; sessionId: string }
  | { kind: "turn-requested" }
  | { kind: "turn-succeeded"; record: TurnRecord }
  | { kind: "turn-failed"; error: GatewayErrorBody }
  | { kind: "scene-loaded"; scene: SceneSpec }
  | { kind: "revision-selected"; revision: number }
  | { kind: "memory-loaded"; turns: TurnRecord[] }
  | { kind: "error-dismissed" };

export function initialState(): UISessionState {
  return {
    sessionId: null,
    turns: [],
    scene: null,
    selectedRevision: null,
    pending: false,
    error: null,
  };
}

/** True when a submit should be allowed right now. */
export function canSubmit(state: UISessionState): boolean {
  return state.sessionId !== null && !state.pending;
}

export function reduce(state: UISessionState, event: UIEvent): UISessionState {
  switch (event.kind) {
    case "session-created":
      return { ...initialState(), sessionId: event.sessionId };
    case "turn-requested":
      if (!canSubmit(state)) {
        // Double-submit: ignore, state unchanged.
        return state;
      }
      return { ...state, pending: true, error: null };
    case "turn-succeeded":
      return {
        ...state,
        pending: false,
        turns: [...state.turns, event.record],
        selectedRevision:
          event.record.scene_revision >= 0 ? event.record.scene_revision : state.selectedRevision,
      };
    case "turn-failed":
      return { ...state, pending: false, error: event.error };
    case "scene-loaded":
      return { ...state, scene: event.scene, selectedRevision: event.scene.revision };
    case "revision-selected":
      return { ...state, selectedRevision: event.revision };
    case "memory-loaded":
      return { ...state, turns: [...event.turns] };
    case "error-dismissed":
      return { ...state, error: null };
  }
}

/** Fold a recorded event log into a state; the replay entry point. */
export function replay(events: UIEvent[], start?: UISessionState): UISessionState {
  return events.reduce(reduce, start ?? initialState());
}
