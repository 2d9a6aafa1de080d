// [SECONDARY acceptance] verify/edit round trip, annotation side: an inline
// field edit issues one API call and the "edited" status chip appears.

import { beforeEach, describe, expect, it } from "vitest";

import { AnnotationEditorView, originalText } from "../src/annotationPanel";
import { ApiClient } from "../src/api";
import { ViewStore } from "../src/state";
import type { AnnotationRecord } from "../src/types";
import { FakeBackend, SESSION_ID, fixtureAnnotations, installBackend } from "./helpers";

describe("AnnotationEditorView", () => {
  let backend: FakeBackend;
  let store: ViewStore;
  let panel: AnnotationEditorView;
  let records: AnnotationRecord[];

  beforeEach(() => {
    backend = installBackend();
    document.body.innerHTML = "";
    store = new ViewStore();
    store.openSession(SESSION_ID, 0, 60_000);
    records = fixtureAnnotations();
    panel = new AnnotationEditorView(document.body, new ApiClient(), store, () => undefined);
  });

  async function flush(): Promise<void> {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }

  function fieldRow(field: string): HTMLElement {
    return document.querySelector<HTMLElement>(`.field-row[data-field='${field}']`)!;
  }

  it("inline edit issues one API call and flips the status chip to edited", async () => {
    panel.show(records[0]);
    expect(document.querySelector(".status-chip")!.textContent).toBe("draft");

    const row = fieldRow("face_description");
    row.querySelector<HTMLTextAreaElement>(".field-input")!.value = "a restrained smile";
    const before = backend.requests.length;
    row.querySelector<HTMLButtonElement>(".save-field")!.click();
    await flush();

    const mutations = backend.requests.slice(before).filter((r) => r.method === "POST");
    expect(mutations).toHaveLength(1);
    expect(mutations[0].url).toContain("/annotations/ann-1/edit");
    expect(mutations[0].body).toEqual({ field: "face_description", new_text: "a restrained smile" });
    expect(document.querySelector(".status-chip")!.textContent).toBe("edited");
    expect(document.querySelector(".status-chip")!.getAttribute("data-status")).toBe("edited");
  });

  it("keeps the original LLM text viewable after an edit", async () => {
    panel.show(records[0]);
    const row = fieldRow("face_description");
    row.querySelector<HTMLTextAreaElement>(".field-input")!.value = "changed";
    row.querySelector<HTMLButtonElement>(".save-field")!.click();
    await flush();

    const details = fieldRow("face_description").querySelector(".original-text")!;
    expect(details.textContent).toContain("lip corner puller, cheek raiser");
  });

  it("originalText falls back to the current value before any edits", () => {
    expect(originalText(records[0], "motion_description")).toBe("still");
    const edited: AnnotationRecord = {
      ...records[0],
      motion_description: "new",
      analyst_edits: [{ field: "motion_description", old: "still", new: "new", at_ms: 1 }],
    };
    expect(originalText(edited, "motion_description")).toBe("still");
  });

  it("verify via the API disables further edits", async () => {
    panel.show(records[0]);
    document.querySelector<HTMLButtonElement>("button.action.verify")!.click();
    await flush();
    expect(document.querySelector(".status-chip")!.textContent).toBe("verified");
    const saves = [...document.querySelectorAll<HTMLButtonElement>(".save-field")];
    expect(saves.every((b) => b.disabled)).toBe(true);
  });

  it("editing a discarded record surfaces the API rejection", async () => {
    panel.show(records[0]);
    document.querySelector<HTMLButtonElement>("button.action.discard")!.click();
    await flush();
    // force a save attempt against the discarded record
    backend.requests.length = 0;
    const row = fieldRow("face_description");
    const save = row.querySelector<HTMLButtonElement>(".save-field")!;
    save.disabled = false;
    save.click();
    await flush();
    expect(document.querySelector(".error-banner")!.textContent).toContain("illegal_transition");
  });
});
