/* Participant session: per-item strict rankings over the manifest's items.
 *
 * A ranking is an ordered list of distinct candidate codes (rank = position
 * + 1), so ties are impossible by construction. An item can be submitted
 * only once its ranking covers every candidate; submitted items are frozen;
 * forward navigation never skips an unsubmitted item.
 */

import { StudyItem, StudyManifest } from "./manifest.js";

export class SessionError extends Error {}

export class Session {
  readonly manifest: StudyManifest;
  readonly participantId: string;
  private index = 0;
  private readonly order: string[][]; // per item: codes in chosen rank order
  private readonly done: boolean[];

  constructor(manifest: StudyManifest, participantId: string) {
    if (!participantId.trim()) throw new SessionError("participant id must not be empty");
    this.manifest = manifest;
    this.participantId = participantId.trim();
    this.order = manifest.items.map(() => []);
    this.done = manifest.items.map(() => false);
  }

  get itemCount(): number {
    return this.manifest.items.length;
  }

  get currentIndex(): number {
    return this.index;
  }

  currentItem(): StudyItem {
    return this.manifest.items[this.index];
  }

  ranking(index: number = this.index): readonly string[] {
    return this.order[index];
  }

  isSubmitted(index: number = this.index): boolean {
    return this.done[index];
  }

  isComplete(index: number = this.index): boolean {
    return this.order[index].length === this.manifest.items[index].candidates.length;
  }

  allSubmitted(): boolean {
    return this.done.every(Boolean);
  }

  /** First item the participant still has to submit (or itemCount when done). */
  firstPending(): number {
    const i = this.done.findIndex((d) => !d);
    return i === -1 ? this.itemCount : i;
  }

  private requireEditable(): void {
    if (this.done[this.index]) throw new SessionError("item already submitted");
  }

  private requireCode(code: string): void {
    if (!this.currentItem().candidates.some((c) => c.code === code)) {
      throw new SessionError(`no candidate with code ${code} in this item`);
    }
  }

  /** Append the candidate to the ranking; ranking the same code twice is a no-op. */
  assign(code: string): void {
    this.requireEditable();
    this.requireCode(code);
    if (!this.order[this.index].includes(code)) this.order[this.index].push(code);
  }

  unassign(code: string): void {
    this.requireEditable();
    const pos = this.order[this.index].indexOf(code);
    if (pos >= 0) this.order[this.index].splice(pos, 1);
  }

  /** Move an already-ranked candidate to a new 0-based position (drag reorder). */
  move(code: string, position: number): void {
    this.requireEditable();
    const ranks = this.order[this.index];
    const from = ranks.indexOf(code);
    if (from < 0) throw new SessionError(`candidate ${code} is not ranked yet`);
    const to = Math.max(0, Math.min(ranks.length - 1, position));
    ranks.splice(from, 1);
    ranks.splice(to, 0, code);
  }

  resetCurrent(): void {
    this.requireEditable();
    this.order[this.index].length = 0;
  }

  canSubmit(): boolean {
    return !this.done[this.index] && this.isComplete();
  }

  /** Freeze the current item's ranking and advance to the next pending item. */
  submit(): void {
    if (this.done[this.index]) throw new SessionError("item already submitted");
    if (!this.isComplete()) {
      throw new SessionError("ranking is incomplete; every candidate needs a rank");
    }
    this.done[this.index] = true;
    if (!this.allSubmitted()) this.index = this.firstPending();
  }

  /** Navigate to a submitted item (review) or the first pending one; never beyond. */
  goTo(index: number): void {
    if (index < 0 || index >= this.itemCount) throw new SessionError("item index out of range");
    if (index > this.firstPending()) {
      throw new SessionError("cannot skip ahead of unsubmitted items");
    }
    this.index = index;
  }

  /** Rank (1 = best) of each method for a submitted item. */
  methodRanks(index: number): Map<string, number> {
    if (!this.done[index]) throw new SessionError("item not submitted yet");
    const byCode = new Map(this.manifest.items[index].candidates.map((c) => [c.code, c.method]));
    const out = new Map<string, number>();
    this.order[index].forEach((code, pos) => {
      out.set(byCode.get(code) as string, pos + 1);
    });
    return out;
  }
}
