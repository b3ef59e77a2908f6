/** Annotation card rendering and the submit/advance flow.
 *
 * The client holds no authoritative state: everything shown is rebuilt from
 * GET /api/session and GET /api/batch, plus local drafts for in-progress
 * scores. Outputs appear only under their server-assigned blinded labels.
 */

import {
  advancePhase,
  ApiError,
  BatchView,
  getBatch,
  getSession,
  postScores,
  ScoreEntry,
  SessionView,
} from "./api.js";
import {
  clearDraft,
  Draft,
  isComplete,
  loadDraft,
  saveDraft,
  setScore,
} from "./drafts.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function likertRow(
  item: string,
  label: string,
  aspect: string,
  scale: { min: number; max: number },
  current: number | undefined,
  onPick: (score: number) => void,
): HTMLElement {
  const row = el("div", "likert-row");
  row.appendChild(el("span", "aspect-name", aspect));
  for (let v = scale.min; v <= scale.max; v++) {
    const wrap = el("label", "likert-option");
    const input = el("input") as HTMLInputElement;
    input.type = "radio";
    input.name = `${item}|${label}|${aspect}`;
    input.value = String(v);
    if (current === v) input.checked = true;
    input.addEventListener("change", () => onPick(v));
    wrap.appendChild(input);
    wrap.appendChild(document.createTextNode(String(v)));
    row.appendChild(wrap);
  }
  return row;
}

interface CardState {
  sampleId: string;
  draft: Draft;
  labels: string[];
}

export class BatchBoard {
  private cards: CardState[] = [];
  private session!: SessionView;
  private batch!: BatchView;

  constructor(private readonly root: HTMLElement) {}

  async refresh(): Promise<void> {
    this.session = await getSession();
    if (this.session.status === "complete") {
      this.renderComplete();
      return;
    }
    this.batch = await getBatch();
    this.renderBatch();
  }

  private renderComplete(): void {
    this.root.replaceChildren();
    const done = el("div", "complete-banner");
    done.appendChild(el("h2", undefined, "Session complete"));
    done.appendChild(
      el("p", undefined, `${this.session.selected_total} samples annotated across ${this.session.phase_count} phases.`),
    );
    this.root.appendChild(done);
  }

  private renderBatch(): void {
    this.root.replaceChildren();
    const { items, aspects, scale, phase } = this.batch;
    this.cards = [];

    const header = el("div", "session-header");
    header.appendChild(
      el("h2", undefined, `Phase ${phase + 1} of ${this.session.phase_count}`),
    );
    const progress = el("p", "progress");
    progress.id = "progress";
    header.appendChild(progress);
    this.root.appendChild(header);

    if (items.length === 0) {
      this.root.appendChild(el("p", "empty", "Awaiting next phase."));
      return;
    }

    const list = el("div", "card-list");
    for (const item of items) {
      const labels = Object.keys(item.outputs).sort();
      const state: CardState = {
        sampleId: item.sample_id,
        draft: loadDraft(phase, item.sample_id),
        labels,
      };
      this.cards.push(state);

      const card = el("article", "card");
      card.dataset.sampleId = item.sample_id;
      card.appendChild(el("h3", undefined, item.sample_id));
      card.appendChild(el("p", "source", item.source));
      for (const ref of item.references) {
        card.appendChild(el("p", "reference", `Reference: ${ref}`));
      }
      for (const label of labels) {
        const block = el("section", "output-block");
        block.appendChild(el("h4", undefined, label));
        block.appendChild(el("p", "output-text", item.outputs[label]));
        for (const aspect of aspects) {
          block.appendChild(
            likertRow(
              item.sample_id,
              label,
              aspect,
              scale,
              state.draft[label]?.[aspect],
              (score) => {
                state.draft = setScore(state.draft, label, aspect, score);
                saveDraft(phase, item.sample_id, state.draft);
                this.updateControls();
              },
            ),
          );
        }
        card.appendChild(block);
      }
      list.appendChild(card);
    }
    this.root.appendChild(list);

    const controls = el("div", "controls");
    const submit = el("button", "submit", "Submit scores") as HTMLButtonElement;
    submit.id = "submit";
    submit.addEventListener("click", () => void this.submit());
    controls.appendChild(submit);
    const advance = el("button", "advance", "Advance phase") as HTMLButtonElement;
    advance.id = "advance";
    advance.hidden = true;
    advance.addEventListener("click", () => void this.advance());
    controls.appendChild(advance);
    const note = el("p", "note");
    note.id = "status-note";
    controls.appendChild(note);
    this.root.appendChild(controls);

    this.updateControls();
  }

  private completedCount(): number {
    const { aspects, scale } = this.batch;
    return this.cards.filter((c) =>
      isComplete(c.draft, c.labels, aspects, scale.min, scale.max),
    ).length;
  }

  updateControls(): void {
    const total = this.cards.length;
    const done = this.completedCount();
    const progress = this.root.querySelector("#progress");
    if (progress) progress.textContent = `${done}/${total} samples scored`;
    const submit = this.root.querySelector("#submit") as HTMLButtonElement | null;
    if (submit) submit.disabled = done < total;
    const advance = this.root.querySelector("#advance") as HTMLButtonElement | null;
    if (advance) advance.hidden = this.session.status !== "ready_to_select";
  }

  private note(text: string): void {
    const node = this.root.querySelector("#status-note");
    if (node) node.textContent = text;
  }

  entries(): ScoreEntry[] {
    const out: ScoreEntry[] = [];
    for (const card of this.cards) {
      for (const label of card.labels) {
        out.push({
          sample_id: card.sampleId,
          blinded_label: label,
          scores: card.draft[label] ?? {},
        });
      }
    }
    return out;
  }

  async submit(): Promise<void> {
    try {
      this.session = await postScores(this.entries());
    } catch (err) {
      // keep drafts on failure; surface the offending sample inline
      this.note(err instanceof ApiError ? err.message : "network error, retry");
      return;
    }
    for (const card of this.cards) {
      clearDraft(this.batch.phase, card.sampleId);
    }
    this.note(
      this.session.status === "ready_to_select"
        ? "Scores accepted; ready to advance."
        : `Scores accepted (${this.session.status}).`,
    );
    this.updateControls();
    if (this.session.status === "complete") {
      this.renderComplete();
    }
  }

  async advance(): Promise<void> {
    try {
      this.session = await advancePhase();
    } catch (err) {
      this.note(err instanceof ApiError ? err.message : "network error, retry");
      return;
    }
    await this.refresh();
  }
}

export async function mountBoard(root: HTMLElement): Promise<BatchBoard> {
  const board = new BatchBoard(root);
  await board.refresh();
  return board;
}
