// Annotation review/editing: inline field editors (one save = one API edit
// call), a status chip that tracks the record's lifecycle, the original LLM
// text kept viewable after edits, and verify/discard/restore controls.

import { ApiClient, ApiError } from "./api";
import { el } from "./format";
import type { ViewStore } from "./state";
import type { AnnotationRecord, AnnotationStatus } from "./types";

export const EDITABLE_FIELDS = [
  "face_description",
  "motion_description",
  "physio_description",
  "context_description",
  "multimodal_description",
  "emotion_descriptor",
] as const;

const ACTIONS: Record<AnnotationStatus, string[]> = {
  draft: ["verify", "discard"],
  edited: ["verify", "discard"],
  verified: [],
  discarded: ["restore"],
};

/** Text the LLM originally produced for a field, before any analyst edits. */
export function originalText(record: AnnotationRecord, field: string): string | null {
  const firstEdit = record.analyst_edits.find((e) => e.field === field);
  if (firstEdit) return firstEdit.old;
  return (record as unknown as Record<string, string | null>)[field];
}

export class AnnotationEditorView {
  readonly root: HTMLElement;
  private record: AnnotationRecord | null = null;
  private mutationInFlight = false;

  constructor(
    container: HTMLElement,
    private api: ApiClient,
    private store: ViewStore,
    private onRecordUpdated: (record: AnnotationRecord) => void,
  ) {
    this.root = el("div", "annotation-panel hidden");
    container.appendChild(this.root);
  }

  show(record: AnnotationRecord): void {
    this.record = record;
    this.render();
  }

  hide(): void {
    this.record = null;
    this.root.classList.add("hidden");
    this.root.textContent = "";
  }

  private render(): void {
    const record = this.record;
    if (!record) return;
    this.root.classList.remove("hidden");
    this.root.textContent = "";
    this.root.appendChild(el("h3", "panel-title", `annotation ${record.annotation_id}`));
    const chip = el("span", "status-chip", record.status);
    chip.dataset.status = record.status;
    this.root.appendChild(chip);

    for (const field of EDITABLE_FIELDS) {
      const value = (record as unknown as Record<string, string | null>)[field];
      const row = el("div", "field-row");
      row.dataset.field = field;
      row.appendChild(el("label", "field-label", field));
      if (record.failed_fields.includes(field.replace("_description", ""))) {
        row.appendChild(el("span", "field-failed", "generation failed"));
      }
      const input = el("textarea", "field-input") as HTMLTextAreaElement;
      input.value = value ?? "";
      row.appendChild(input);
      const original = originalText(record, field);
      if (original !== null && original !== value) {
        const details = el("details", "original-text");
        details.appendChild(el("summary", "", "original LLM text"));
        details.appendChild(el("pre", "", original));
        row.appendChild(details);
      }
      const save = el("button", "save-field", "save");
      save.disabled = this.mutationInFlight || record.status === "verified" || record.status === "discarded";
      save.addEventListener("click", () => void this.saveField(field, input.value));
      row.appendChild(save);
      this.root.appendChild(row);
    }

    const buttons = el("div", "action-buttons");
    for (const action of ["verify", "discard", "restore"]) {
      const button = el("button", `action ${action}`, action);
      button.dataset.action = action;
      button.disabled = this.mutationInFlight || !ACTIONS[record.status].includes(action);
      button.addEventListener("click", () => void this.runAction(action));
      buttons.appendChild(button);
    }
    this.root.appendChild(buttons);
    this.root.appendChild(el("div", "error-banner hidden"));
  }

  private async saveField(field: string, newText: string): Promise<void> {
    const record = this.record;
    const state = this.store.current;
    if (!record || !state.sessionId || this.mutationInFlight) return;
    this.mutationInFlight = true;
    try {
      const updated = await this.api.editAnnotation(
        state.sessionId,
        record.annotation_id,
        field,
        newText,
      );
      this.record = updated;
      this.onRecordUpdated(updated);
    } catch (error) {
      this.showError(error);
    } finally {
      this.mutationInFlight = false;
      this.render();
    }
  }

  private async runAction(action: string): Promise<void> {
    const record = this.record;
    const state = this.store.current;
    if (!record || !state.sessionId || this.mutationInFlight) return;
    this.mutationInFlight = true;
    try {
      const updated = await this.api.annotationAction(state.sessionId, record.annotation_id, action);
      this.record = updated;
      this.onRecordUpdated(updated);
    } catch (error) {
      this.showError(error);
    } finally {
      this.mutationInFlight = false;
      this.render();
    }
  }

  private showError(error: unknown): void {
    const banner = this.root.querySelector(".error-banner");
    if (!banner) return;
    banner.classList.remove("hidden");
    banner.textContent =
      error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
  }
}
