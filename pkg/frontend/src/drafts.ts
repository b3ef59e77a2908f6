/** Local draft persistence so a reload or disconnect never loses scores.
 *
 * Drafts live in localStorage keyed by phase and sample until the server
 * acknowledges the submission.
 */

export type Draft = Record<string, Record<string, number>>; // label -> aspect -> score

const PREFIX = "casf-draft";

function key(phase: number, sampleId: string): string {
  return `${PREFIX}:${phase}:${sampleId}`;
}

export function saveDraft(phase: number, sampleId: string, draft: Draft): void {
  localStorage.setItem(key(phase, sampleId), JSON.stringify(draft));
}

export function loadDraft(phase: number, sampleId: string): Draft {
  const raw = localStorage.getItem(key(phase, sampleId));
  if (!raw) return {};
  try {
    return JSON.parse(raw) as Draft;
  } catch {
    return {};
  }
}

export function clearDraft(phase: number, sampleId: string): void {
  localStorage.removeItem(key(phase, sampleId));
}

export function clearAllDrafts(): void {
  const stale: string[] = [];
  for (let i = 0; i < localStorage.length; i++) {
    const k = localStorage.key(i);
    if (k && k.startsWith(PREFIX)) stale.push(k);
  }
  stale.forEach((k) => localStorage.removeItem(k));
}

export function setScore(
  draft: Draft,
  label: string,
  aspect: string,
  score: number,
): Draft {
  return { ...draft, [label]: { ...(draft[label] ?? {}), [aspect]: score } };
}

/** A draft is complete when every (label, aspect) cell has an in-bounds score. */
export function isComplete(
  draft: Draft,
  labels: string[],
  aspects: string[],
  min: number,
  max: number,
): boolean {
  return labels.every((label) =>
    aspects.every((aspect) => {
      const value = draft[label]?.[aspect];
      return value !== undefined && value >= min && value <= max;
    }),
  );
}
