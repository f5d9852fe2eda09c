// Engagement launcher form state. The graph view's gap rows deep-link here
// with the uncovered ticker pre-filled; submitting maps 1:1 to
// POST /engagements.

import type { CreateEngagementRequest, GapRow } from "./types.js";

export interface LauncherState {
  ticker: string;
  personaId: string; // "" means engine default for the workflow
  workflowId: string;
  seed: number;
  /** Non-empty when the form was opened from a gap row. */
  prefilledFrom: string;
}

export function emptyLauncher(workflowId = "pitch-memo"): LauncherState {
  return { ticker: "", personaId: "", workflowId, seed: 0, prefilledFrom: "" };
}

/** Gap row -> launcher state carrying the uncovered ticker. */
export function prefillFromGap(state: LauncherState, gap: GapRow): LauncherState {
  return {
    ...state,
    ticker: gap.ticker,
    prefilledFrom: `gap:${gap.ticker}`,
  };
}

export function validateLauncher(state: LauncherState): string[] {
  const problems: string[] = [];
  if (!state.ticker.trim()) problems.push("ticker is required");
  if (!state.workflowId.trim()) problems.push("workflow is required");
  if (!Number.isInteger(state.seed) || state.seed < 0) {
    problems.push("seed must be a non-negative integer");
  }
  return problems;
}

export function buildCreateRequest(state: LauncherState): CreateEngagementRequest {
  const request: CreateEngagementRequest = {
    workflow_id: state.workflowId.trim(),
    ticker: state.ticker.trim().toUpperCase(),
    seed: state.seed,
  };
  if (state.personaId.trim()) request.persona_id = state.personaId.trim();
  return request;
}
