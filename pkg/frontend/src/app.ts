/* DOM layer: wires the session state machine to a static page.
 *
 * The app fetches a study manifest over HTTP, presents each item's shuffled
 * candidates under their anonymous codes, and enables export only when every
 * item carries a complete strict ranking. I/O (fetch, file download, POST) is
 * injectable so scripted sessions can run without a server.
 */

import { exportRanks } from "./csv.js";
import { ManifestError, parseManifest, StudyManifest } from "./manifest.js";
import { Session, SessionError } from "./session.js";

export interface AppOptions {
  fetchText?: (url: string) => Promise<string>;
  saveFile?: (name: string, text: string) => void;
  postRanks?: (url: string, body: string) => Promise<boolean>;
  manifestUrl?: string;
  postUrl?: string | null;
}

async function defaultFetchText(url: string): Promise<string> {
  const response = await fetch(url);
  if (!response.ok) throw new Error(`GET ${url} failed: ${response.status}`);
  return response.text();
}

function defaultSaveFile(name: string, text: string): void {
  const blob = new Blob([text], { type: "text/csv" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = name;
  document.body.appendChild(link);
  link.click();
  link.remove();
  URL.revokeObjectURL(link.href);
}

async function defaultPostRanks(url: string, body: string): Promise<boolean> {
  const response = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "text/csv" },
    body,
  });
  return response.ok;
}

export class App {
  private readonly root: HTMLElement;
  private readonly fetchText: (url: string) => Promise<string>;
  private readonly saveFile: (name: string, text: string) => void;
  private readonly postRanksFn: (url: string, body: string) => Promise<boolean>;
  private readonly manifestUrl: string;
  private readonly postUrl: string | null;
  private session: Session | null = null;
  private dragCode: string | null = null;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.fetchText = options.fetchText ?? defaultFetchText;
    this.saveFile = options.saveFile ?? defaultSaveFile;
    this.postRanksFn = options.postRanks ?? defaultPostRanks;
    const params = new URLSearchParams(window.location.search);
    this.manifestUrl = options.manifestUrl ?? params.get("manifest") ?? "manifest.json";
    this.postUrl = options.postUrl !== undefined ? options.postUrl : params.get("post");
    this.renderSetup();
  }

  /* ---------------------------------------------------------------- setup */

  private renderSetup(): void {
    this.root.innerHTML = `
      <section id="setup">
        <h1>Image ranking study</h1>
        <p>You will see several versions of each image, labelled A, B, C, &hellip;
           Rank them by overall image quality: click the best one first,
           then the next best, until all are ranked.</p>
        <label>Participant id
          <input id="participant" type="text" autocomplete="off">
        </label>
        <button id="start">Start</button>
        <p id="setup-error" class="error" role="alert" hidden></p>
      </section>`;
    const start = this.query<HTMLButtonElement>("#start");
    start.addEventListener("click", () => void this.start());
  }

  private async start(): Promise<void> {
    const errorBox = this.query<HTMLElement>("#setup-error");
    const participant = this.query<HTMLInputElement>("#participant").value;
    errorBox.hidden = true;
    try {
      if (!participant.trim()) throw new SessionError("please enter a participant id");
      const manifest: StudyManifest = parseManifest(await this.fetchText(this.manifestUrl));
      this.session = new Session(manifest, participant);
    } catch (err) {
      const why = err instanceof ManifestError ? `invalid manifest: ${err.message}` : String(
        err instanceof Error ? err.message : err
      );
      errorBox.textContent = why;
      errorBox.hidden = false;
      return;
    }
    this.renderStudy();
  }

  /* ---------------------------------------------------------------- study */

  private renderStudy(): void {
    const session = this.session as Session;
    if (session.allSubmitted()) {
      this.renderExport();
      return;
    }
    const item = session.currentItem();
    const index = session.currentIndex;
    const readonly = session.isSubmitted();

    const cards = item.candidates
      .map(
        (c) => `
        <figure class="candidate" data-code="${c.code}">
          <img src="${c.file}" alt="version ${c.code}">
          <figcaption>${c.code}</figcaption>
        </figure>`
      )
      .join("");

    this.root.innerHTML = `
      <section id="study">
        <div id="progress">Item ${index + 1} of ${session.itemCount}
          ${readonly ? "(submitted, read-only)" : ""}</div>
        <div id="candidates">${cards}</div>
        <p>Ranking (best first):</p>
        <ol id="ranking"></ol>
        <div id="controls">
          <button id="prev">Back</button>
          <button id="reset">Reset</button>
          <button id="submit">Submit ranking</button>
        </div>
        <p id="study-error" class="error" role="alert" hidden></p>
      </section>`;

    for (const card of this.root.querySelectorAll<HTMLElement>(".candidate")) {
      card.addEventListener("click", () => {
        if (readonly) return;
        session.assign(card.dataset.code as string);
        this.renderStudy();
      });
    }
    this.query<HTMLButtonElement>("#reset").disabled = readonly;
    this.query<HTMLButtonElement>("#reset").addEventListener("click", () => {
      session.resetCurrent();
      this.renderStudy();
    });
    this.query<HTMLButtonElement>("#prev").disabled = index === 0;
    this.query<HTMLButtonElement>("#prev").addEventListener("click", () => {
      session.goTo(index - 1);
      this.renderStudy();
    });
    const submit = this.query<HTMLButtonElement>("#submit");
    if (readonly) {
      submit.textContent = "Next";
      submit.addEventListener("click", () => {
        session.goTo(index + 1);
        this.renderStudy();
      });
    } else {
      submit.disabled = !session.canSubmit();
      submit.addEventListener("click", () => {
        try {
          session.submit();
        } catch (err) {
          this.showStudyError(err);
          return;
        }
        this.renderStudy();
      });
    }
    this.renderRanking(readonly);
  }

  private renderRanking(readonly: boolean): void {
    const session = this.session as Session;
    const list = this.query<HTMLOListElement>("#ranking");
    list.innerHTML = "";
    session.ranking().forEach((code, position) => {
      const entry = document.createElement("li");
      entry.dataset.code = code;
      entry.textContent = `${position + 1}. ${code} `;
      if (!readonly) {
        entry.draggable = true;
        entry.addEventListener("dragstart", () => {
          this.dragCode = code;
        });
        entry.addEventListener("dragover", (event) => event.preventDefault());
        entry.addEventListener("drop", (event) => {
          event.preventDefault();
          if (this.dragCode && this.dragCode !== code) {
            session.move(this.dragCode, position);
            this.dragCode = null;
            this.renderStudy();
          }
        });
        const remove = document.createElement("button");
        remove.className = "unrank";
        remove.textContent = "×";
        remove.addEventListener("click", (event) => {
          event.stopPropagation();
          session.unassign(code);
          this.renderStudy();
        });
        entry.appendChild(remove);
      }
      list.appendChild(entry);
    });
  }

  private showStudyError(err: unknown): void {
    const box = this.query<HTMLElement>("#study-error");
    box.textContent = err instanceof Error ? err.message : String(err);
    box.hidden = false;
  }

  /* --------------------------------------------------------------- export */

  private renderExport(): void {
    const session = this.session as Session;
    this.root.innerHTML = `
      <section id="export">
        <h1>All ${session.itemCount} items submitted &mdash; thank you!</h1>
        <button id="download">Download rank CSV</button>
        ${this.postUrl ? '<button id="post">Send results</button>' : ""}
        <p id="export-status" role="status" hidden></p>
      </section>`;
    this.query<HTMLButtonElement>("#download").addEventListener("click", () => {
      this.saveFile(`ranks-${session.participantId}.csv`, exportRanks(session));
      this.setStatus("CSV downloaded.");
    });
    if (this.postUrl) {
      this.query<HTMLButtonElement>("#post").addEventListener("click", () => {
        void this.postRanksFn(this.postUrl as string, exportRanks(session)).then((ok) => {
          this.setStatus(ok ? "Results sent." : "Sending failed; download the CSV instead.");
        });
      });
    }
  }

  private setStatus(text: string): void {
    const status = this.query<HTMLElement>("#export-status");
    status.textContent = text;
    status.hidden = false;
  }

  private query<T extends Element>(selector: string): T {
    const found = this.root.querySelector<T>(selector);
    if (!found) throw new Error(`missing element ${selector}`);
    return found;
  }
}

export function mount(root: HTMLElement, options: AppOptions = {}): App {
  return new App(root, options);
}

// Auto-mount in the browser; tests import and mount explicitly.
if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app") as HTMLElement);
}
