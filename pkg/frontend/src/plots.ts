/** The three figure kinds rendered from cdpde CSV artifacts. */
import { CsvFormatError, CsvTable, numeric, readTable, requireColumns, requireRows } from "./csv.js";
import { Series, heatmap, lineChart } from "./svg.js";

export type PlotKind = "profile" | "convergence" | "defect-heatmap";

export interface PlotJob {
  kind: PlotKind;
  inputs: string[];
  output: string;
}

function scenarioTag(table: CsvTable): string {
  const p = table.meta.p !== undefined ? ` p=${table.meta.p}` : "";
  return `${table.meta.scenario}${p}`;
}

/** Kernel/velocity profiles along the ray, one curve per parameter value. */
export function renderProfile(paths: string[]): string {
  const series: Series[] = [];
  let tag = "";
  for (const path of paths) {
    const table = readTable(path);
    requireRows(table);
    const [labelCol, tCol, sCol, normCol] = requireColumns(table, [
      "label", "t", "s", "norm",
    ]);
    tag = scenarioTag(table);
    const groups = new Map<string, { x: number[]; y: number[] }>();
    const ss = numeric(table, sCol);
    const ns = numeric(table, normCol);
    table.rows.forEach((row, i) => {
      const key = `${row[labelCol]} t=${row[tCol]}`;
      if (!groups.has(key)) groups.set(key, { x: [], y: [] });
      groups.get(key)!.x.push(ss[i]);
      groups.get(key)!.y.push(ns[i]);
    });
    for (const [label, g] of groups) {
      series.push({ label, x: g.x, y: g.y });
    }
  }
  return lineChart(series, {
    title: `profile along the ray — ${tag}`,
    xlabel: "ray parameter s",
    ylabel: "|value|",
  });
}

/** Neumann contraction curve: per-iteration increment on a log scale. */
export function renderConvergence(paths: string[]): string {
  const series: Series[] = [];
  let tag = "";
  for (const path of paths) {
    const table = readTable(path);
    requireRows(table);
    const [itCol, deltaCol] = requireColumns(table, ["iteration", "delta"]);
    tag = scenarioTag(table);
    const its = numeric(table, itCol);
    const deltas = numeric(table, deltaCol);
    series.push({ label: `delta (${table.meta.scenario})`, x: its, y: deltas });
  }
  return lineChart(series, {
    title: `fixed-point contraction — ${tag}`,
    xlabel: "iteration",
    ylabel: "lattice increment",
    logY: true,
  });
}

/** Identity-defect heatmap: worst defect per (order m, identity). */
export function renderDefectHeatmap(paths: string[]): string {
  const cells = new Map<string, number>();
  const msSet = new Set<number>();
  const idSet = new Set<string>();
  let tag = "";
  for (const path of paths) {
    const table = readTable(path);
    requireRows(table);
    const [famCol, idCol, mCol, , defCol] = requireColumns(table, [
      "family", "identity", "m", "pair", "defect",
    ]);
    tag = scenarioTag(table);
    const ms = numeric(table, mCol);
    const defs = numeric(table, defCol);
    table.rows.forEach((row, i) => {
      const ident = `${row[famCol]}/${row[idCol]}`;
      idSet.add(ident);
      msSet.add(ms[i]);
      const key = `${ident}|${ms[i]}`;
      cells.set(key, Math.max(cells.get(key) ?? 0, defs[i]));
    });
  }
  const msList = [...msSet].sort((a, b) => a - b);
  const idList = [...idSet].sort();
  const heat = [];
  for (const [key, value] of [...cells.entries()].sort()) {
    const [ident, m] = key.split("|");
    heat.push({
      ix: msList.indexOf(Number(m)),
      iy: idList.indexOf(ident),
      value,
    });
  }
  return heatmap(heat, msList.map((m) => `m=${m}`), idList, {
    title: `identity defects — ${tag}`,
    xlabel: "operator order m",
    ylabel: "identity",
  });
}

export function render(job: PlotJob): string {
  if (job.inputs.length === 0) {
    throw new CsvFormatError("no input CSV files given");
  }
  switch (job.kind) {
    case "profile":
      return renderProfile(job.inputs);
    case "convergence":
      return renderConvergence(job.inputs);
    case "defect-heatmap":
      return renderDefectHeatmap(job.inputs);
    default:
      throw new CsvFormatError(`unknown plot kind '${job.kind}'`);
  }
}
