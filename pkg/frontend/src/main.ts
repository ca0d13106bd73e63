// DOM wiring for the studio page. All state logic lives in session.ts;
// this module only reflects SessionState into the panes and forwards
// user events.

import { ApiClient, GalleryEntry } from "./api.js";
import { MACROS, macroByName } from "./macros.js";
import { SessionState, StudioSession } from "./session.js";

function el<T extends HTMLElement>(id: string, cls: new () => T): T {
  const node = document.getElementById(id);
  if (!(node instanceof cls)) throw new Error(`missing #${id}`);
  return node;
}

const program = el("program", HTMLTextAreaElement);
const gallerySelect = el("gallery", HTMLSelectElement);
const macroSelect = el("macro", HTMLSelectElement);
const macroParams = el("macro-params", HTMLDivElement);
const datasetLabel = el("dataset-label", HTMLSpanElement);
const upload = el("upload", HTMLInputElement);
const banner = el("banner", HTMLDivElement);
const diagnostics = el("diagnostics", HTMLPreElement);
const svgPane = el("svg-pane", HTMLDivElement);
const statsPane = el("stats", HTMLTableElement);
const schemaPane = el("schema", HTMLDivElement);

const api = new ApiClient("");
const session = new StudioSession(api, renderState);

let entries: GalleryEntry[] = [];

function renderState(s: SessionState): void {
  banner.textContent = s.banner ?? "";
  banner.style.display = s.banner ? "block" : "none";
  diagnostics.textContent = s.diagnostics.join("\n");
  if (s.lastGood) {
    svgPane.innerHTML = s.lastGood.svg;
    const st = s.lastGood.stats;
    if (st) {
      statsPane.innerHTML = [
        ["kPlanned", st.kPlanned],
        ["kObserved", st.kObserved],
        ["perRowMax", st.perRowMax],
        ["sortPasses", st.sortPasses],
        ["certifiedDataLinear", st.certifiedDataLinear],
        ["tableLength", st.tableLength],
        ["totalAccesses", st.totalAccesses],
      ]
        .map(
          ([k, v]) =>
            `<tr><td>${k}</td><td class="${
              k === "certifiedDataLinear" ? (v ? "good" : "bad") : ""
            }">${v}</td></tr>`,
        )
        .join("");
    }
  }
  if (s.dataset) {
    datasetLabel.textContent =
      s.dataset.kind === "gallery"
        ? `gallery: ${s.dataset.name}`
        : s.dataset.label;
  }
  schemaPane.textContent = s.schema
    .map((a) => `${a.name}: ${a.type}`)
    .join("  ");
  document.body.classList.toggle("rendering", s.rendering);
  if (program.value !== s.programText && document.activeElement !== program) {
    program.value = s.programText;
  }
}

function rebuildMacroParams(): void {
  const macro = macroByName(macroSelect.value);
  macroParams.innerHTML = "";
  if (!macro) return;
  const numericAttrs = session.state.schema
    .filter((a) => a.type === "numeric")
    .map((a) => a.name);
  const allAttrs = session.state.schema.map((a) => a.name);
  for (const param of macro.params) {
    const label = document.createElement("label");
    label.textContent = param.label + " ";
    if (param.kind === "attr-list") {
      const input = document.createElement("input");
      input.dataset.param = param.name;
      input.value = numericAttrs.slice(0, 3).join(",");
      input.addEventListener("change", applyMacro);
      label.appendChild(input);
    } else {
      const select = document.createElement("select");
      select.dataset.param = param.name;
      const options =
        param.kind === "optional-attr" ? ["", ...allAttrs] : numericAttrs.length ? numericAttrs : allAttrs;
      for (const name of options) {
        const opt = document.createElement("option");
        opt.value = name;
        opt.textContent = name || "(none)";
        select.appendChild(opt);
      }
      select.addEventListener("change", applyMacro);
      label.appendChild(select);
    }
    macroParams.appendChild(label);
  }
  applyMacro();
}

function applyMacro(): void {
  const macro = macroByName(macroSelect.value);
  if (!macro) return;
  const values: Record<string, string> = {};
  macroParams
    .querySelectorAll<HTMLSelectElement | HTMLInputElement>("[data-param]")
    .forEach((node) => {
      values[node.dataset.param ?? ""] = node.value;
    });
  session.setProgramImmediate(macro.build(values));
}

async function boot(): Promise<void> {
  entries = await api.gallery();
  for (const entry of entries) {
    const opt = document.createElement("option");
    opt.value = entry.name;
    opt.textContent = `${entry.name} - ${entry.title}`;
    gallerySelect.appendChild(opt);
  }
  for (const macro of MACROS) {
    const opt = document.createElement("option");
    opt.value = macro.name;
    opt.textContent = macro.label;
    macroSelect.appendChild(opt);
  }
  gallerySelect.addEventListener("change", () => {
    const entry = entries.find((e) => e.name === gallerySelect.value);
    if (!entry) return;
    session.selectGalleryDataset(entry.name);
    session.setProgramImmediate(entry.program);
    void session.refreshSchema().then(rebuildMacroParams);
  });
  macroSelect.addEventListener("change", rebuildMacroParams);
  program.addEventListener("input", () => session.setProgramText(program.value));
  upload.addEventListener("change", async () => {
    const file = upload.files?.[0];
    if (!file) return;
    await session.uploadCsv(await file.text(), file.name);
  });
  // start on the first entry
  const first = entries[0];
  if (first) {
    gallerySelect.value = first.name;
    session.selectGalleryDataset(first.name);
    session.setProgramImmediate(first.program);
    await session.refreshSchema();
    rebuildMacroParams();
  }
}

void boot();
