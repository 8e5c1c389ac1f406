import init, { fuseFixture, fuseTables, shapleyPlayground, compareExplainers, sensorNames } from "./pkg/featfuse_demo.js";

const $ = (id) => document.getElementById(id);

function el(tag, attrs = {}, ...children) {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  for (const c of children) node.append(c instanceof Node ? c : String(c));
  return node;
}

function showError(target, err) {
  target.replaceChildren(el("p", { class: "error" }, err && err.message ? err.message : String(err)));
}

function numbers(text) {
  return text.split(",").map((s) => s.trim()).filter((s) => s.length).map(Number);
}

function rankingTable(view) {
  const top = new Set(view.top);
  const table = el("table", {}, el("caption", {}, view.label),
    el("tr", {}, el("th", {}, "#"), el("th", {}, "feature"), el("th", {}, "score")));
  for (const row of view.rows) {
    const cls = row.flagged ? "flagged" : top.has(row.feature) ? "top" : "";
    table.append(el("tr", { class: cls },
      el("td", { class: "num" }, row.rank), el("td", {}, row.feature),
      el("td", { class: "num" }, Number(row.score.toFixed(3)))));
  }
  return table;
}

function renderFusion(target, view) {
  target.replaceChildren(...view.methods.map(rankingTable), rankingTable(view.leveled),
    el("p", { class: "note" }, "Green rows are the top-k; grey rows scored zero points."));
}

function runFusion() {
  const out = $("fusion-out");
  const source = $("fusion-source").value;
  const k = Number($("fusion-k").value);
  const points = $("fusion-points").value;
  const mode = $("fusion-mode").value;
  try {
    const json = source === "custom"
      ? fuseTables($("csv-shap").value, $("csv-lime").value, $("csv-dalex").value, k, points, mode)
      : fuseFixture(source, k, points, mode);
    renderFusion(out, JSON.parse(json));
  } catch (e) {
    showError(out, e);
  }
}

function runShapley() {
  const out = $("sh-out");
  try {
    const weights = numbers($("sh-weights").value);
    const input = {
      model: { weights, interaction: Number($("sh-inter").value), bias: Number($("sh-bias").value) },
      instance: numbers($("sh-x").value),
      background: $("sh-bg").value.split("\n").filter((l) => l.trim()).map(numbers),
    };
    const r = JSON.parse(shapleyPlayground(JSON.stringify(input)));
    const scale = Math.max(1e-9, ...r.phi.map(Math.abs));
    const table = el("table", {}, el("tr", {}, el("th", {}, "feature"), el("th", {}, "phi"), el("th", {}, "")));
    r.phi.forEach((v, j) => {
      const bar = el("span", { class: v < 0 ? "bar neg" : "bar", style: `width:${(120 * Math.abs(v)) / scale}px` });
      table.append(el("tr", {}, el("td", {}, `x${j}`), el("td", { class: "num" }, v.toFixed(5)), el("td", {}, bar)));
    });
    out.replaceChildren(table, el("p", {},
      `base ${r.base_value.toFixed(5)} + sum(phi) = f(x) ${r.output.toFixed(5)}; `,
      `efficiency error ${r.efficiency_error.toExponential(1)} over ${r.coalitions} coalitions`));
  } catch (e) {
    showError(out, e);
  }
}

function setupPlanted() {
  const names = JSON.parse(sensorNames());
  const defaults = new Set(["Location", "Correlation", "Lane Alignment", "Protocol", "Consistency"]);
  const box = $("cmp-planted");
  box.replaceChildren("planted sensors: ");
  for (const name of names) {
    const input = el("input", { type: "checkbox", value: name });
    input.checked = defaults.has(name);
    box.append(el("label", {}, input, " " + name));
  }
}

function runCompare() {
  const out = $("cmp-out");
  out.replaceChildren(el("p", { class: "note" }, "training..."));
  setTimeout(() => {
    try {
      const planted = [...$("cmp-planted").querySelectorAll("input:checked")].map((i) => i.value).join(",");
      const r = JSON.parse(compareExplainers(Number($("cmp-n").value), Number($("cmp-seed").value),
        planted, $("cmp-model").value, Number($("cmp-k").value)));
      const plantedSet = new Set(r.planted);
      const head = el("tr", {}, el("th", {}, "feature"), ...r.methods.map((m) => el("th", {}, `${m.label} rank`)));
      const table = el("table", {}, head);
      r.feature_names.forEach((name, j) => {
        table.append(el("tr", { class: plantedSet.has(name) ? "top" : "" }, el("td", {}, name),
          ...r.methods.map((m) => el("td", { class: "num" }, m.ranks[j]))));
      });
      out.replaceChildren(
        el("p", {}, `test accuracy ${r.accuracy.toFixed(3)}; green rows are planted sensors`),
        table, rankingTable(r.fusion.leveled));
    } catch (e) {
      showError(out, e);
    }
  }, 10);
}

await init();
$("fusion-source").addEventListener("change", () => {
  $("fusion-custom").hidden = $("fusion-source").value !== "custom";
  if ($("fusion-source").value === "sensor_binary") $("fusion-k").value = 5;
});
$("fusion-run").addEventListener("click", runFusion);
$("sh-run").addEventListener("click", runShapley);
$("cmp-run").addEventListener("click", runCompare);
setupPlanted();
runFusion();
runShapley();
