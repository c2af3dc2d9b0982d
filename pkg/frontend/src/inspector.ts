// Knowledge inspector: retrieved (statement id, score) rows for one turn.
// Scores render with exactly 4 decimals; default order is score descending.

export interface ScoreRow {
  id: string;
  score: number;
  display: string;
}

export type SortOrder = "score-desc" | "score-asc" | "id-asc";

export function formatScore(score: number): string {
  return score.toFixed(4);
}

export function scoreTable(
  retrieved: [string, number][],
  order: SortOrder = "score-desc"
): ScoreRow[] {
  const rows = retrieved.map(([id, score]) => ({ id, score, display: formatScore(score) }));
  switch (order) {
    case "score-desc":
      rows.sort((a, b) => b.score - a.score || a.id.localeCompare(b.id));
      break;
    case "score-asc":
      rows.sort((a, b) => a.score - b.score || a.id.localeCompare(b.id));
      break;
    case "id-asc":
      rows.sort((a, b) => a.id.localeCompare(b.id));
      break;
  }
  return rows;
}

export const EMPTY_PLACEHOLDER = "No knowledge retrieved for this turn.";
