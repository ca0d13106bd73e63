// Studio session state: the program text, the dataset selection, and the
// last render result - which always corresponds to a previously submitted
// (program, dataset) pair, never a stale mix. At most one render is in
// flight; superseded responses are dropped by sequence number.

import { ApiClient, RenderResponse, RenderStats, SchemaAttr } from "./api.js";
import { debounce, Debounced } from "./debounce.js";

export type DatasetSelection =
  | { kind: "gallery"; name: string; rows?: number }
  | { kind: "inline"; csv: string; label: string };

export interface RenderResult {
  svg: string;
  stats: RenderStats | null;
  diagnostics: string[];
  requestId: number;
}

export interface SessionState {
  programText: string;
  dataset: DatasetSelection | null;
  lastGood: RenderResult | null;
  diagnostics: string[];
  banner: string | null;
  dirty: boolean;
  rendering: boolean;
  schema: SchemaAttr[];
}

export const DEBOUNCE_MS = 300;

export class StudioSession {
  readonly state: SessionState = {
    programText: "",
    dataset: null,
    lastGood: null,
    diagnostics: [],
    banner: null,
    dirty: false,
    rendering: false,
    schema: [],
  };

  private seq = 0;
  private readonly debouncedRender: Debounced<[]>;

  constructor(
    private readonly api: ApiClient,
    private readonly onUpdate: (s: SessionState) => void = () => {},
    debounceMs: number = DEBOUNCE_MS,
    private readonly device: { width: number; height: number } = {
      width: 800,
      height: 600,
    },
  ) {
    this.debouncedRender = debounce(() => void this.renderNow(), debounceMs);
  }

  /** Keystroke path: re-render after the debounce window. */
  setProgramText(text: string): void {
    this.state.programText = text;
    this.state.dirty = true;
    this.notify();
    this.debouncedRender();
  }

  /** Picker path (macro parameter, gallery entry, dataset): immediate. */
  setProgramImmediate(text: string): void {
    this.state.programText = text;
    this.state.dirty = true;
    this.debouncedRender.cancel();
    void this.renderNow();
  }

  selectGalleryDataset(name: string, rows?: number): void {
    this.state.dataset = { kind: "gallery", name, rows };
    this.state.dirty = true;
    this.debouncedRender.cancel();
    void this.renderNow();
  }

  async uploadCsv(csv: string, label: string): Promise<void> {
    this.state.dataset = { kind: "inline", csv, label };
    this.state.dirty = true;
    // surface ingestion/validation errors verbatim before rendering
    try {
      const res = await this.api.validate({
        program: "Visualization { }",
        data: csv,
      });
      if (!res.ok) {
        this.state.banner = res.body.diagnostics.join("; ");
        this.notify();
        return;
      }
      this.state.schema = res.body.schema ?? [];
      this.state.banner = null;
    } catch (err) {
      this.state.banner = `service unreachable: ${String(err)}`;
      this.notify();
      return;
    }
    this.notify();
    await this.renderNow();
  }

  async refreshSchema(): Promise<void> {
    const ds = this.state.dataset;
    if (!ds) return;
    try {
      const res = await this.api.validate({
        program: "Visualization { }",
        ...(ds.kind === "gallery" ? { dataset: ds.name } : { data: ds.csv }),
      });
      if (res.ok) {
        this.state.schema = res.body.schema ?? [];
        this.notify();
      }
    } catch {
      // schema refresh is best-effort; the banner comes from renders
    }
  }

  async renderNow(): Promise<void> {
    const ds = this.state.dataset;
    if (!ds || !this.state.programText.trim()) return;
    const id = ++this.seq;
    this.state.rendering = true;
    this.notify();
    let result: { ok: boolean; status: number; body: RenderResponse };
    try {
      result = await this.api.render({
        program: this.state.programText,
        ...(ds.kind === "gallery"
          ? { dataset: ds.name, rows: ds.rows }
          : { data: ds.csv }),
        width: this.device.width,
        height: this.device.height,
        outputs: ["svg", "stats"],
      });
    } catch (err) {
      if (id !== this.seq) return; // superseded
      this.state.rendering = false;
      this.state.banner = `service unreachable: ${String(err)}`;
      this.notify(); // last good render is retained
      return;
    }
    if (id !== this.seq) return; // a newer request owns the panes
    this.state.rendering = false;
    this.state.banner = null;
    if (result.ok && result.body.svg !== undefined) {
      this.state.lastGood = {
        svg: result.body.svg,
        stats: result.body.stats ?? null,
        diagnostics: result.body.diagnostics,
        requestId: id,
      };
      this.state.diagnostics = result.body.diagnostics;
      this.state.dirty = false;
    } else {
      // invalid program: keep the previous SVG, show diagnostics inline
      this.state.diagnostics = result.body.diagnostics ?? [
        `render failed with status ${result.status}`,
      ];
    }
    this.notify();
  }

  private notify(): void {
    this.onUpdate(this.state);
  }
}
