/**CSV artifact reader for cdpde outputs.
 *
 * Every artifact starts with a meta comment `# cdpde=<version>
 * scenario=<name> seed=<n> [p=<p>]` followed by a header row. Files whose
 * tool version differs from the version this package was built against are
 * refused.
 */
import { readFileSync } from "node:fs";

export const EXPECTED_TOOL_VERSION = "0.1.0";

export interface CsvMeta {
  version: string;
  scenario: string;
  seed: string;
  p?: string;
}

export interface CsvTable {
  meta: CsvMeta;
  columns: string[];
  rows: string[][];
  path: string;
}

export class CsvFormatError extends Error {}

export function parseMeta(line: string): CsvMeta {
  if (!line.startsWith("# cdpde=")) {
    throw new CsvFormatError(`missing cdpde meta header: ${line.slice(0, 40)}`);
  }
  const fields = new Map<string, string>();
  for (const token of line.slice(2).trim().split(/\s+/)) {
    const eq = token.indexOf("=");
    if (eq > 0) fields.set(token.slice(0, eq), token.slice(eq + 1));
  }
  const version = fields.get("cdpde");
  const scenario = fields.get("scenario");
  const seed = fields.get("seed");
  if (!version || !scenario || seed === undefined) {
    throw new CsvFormatError(`incomplete meta header: ${line}`);
  }
  return { version, scenario, seed, p: fields.get("p") };
}

export function readTable(path: string): CsvTable {
  const text = readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length < 2) {
    throw new CsvFormatError(`${path}: no header rows`);
  }
  const meta = parseMeta(lines[0]);
  if (meta.version !== EXPECTED_TOOL_VERSION) {
    throw new CsvFormatError(
      `${path}: tool version ${meta.version} does not match expected ` +
        `${EXPECTED_TOOL_VERSION}`,
    );
  }
  const columns = lines[1].split(",");
  const rows = lines.slice(2).map((ln) => ln.split(","));
  return { meta, columns, rows, path };
}

export function requireColumns(table: CsvTable, names: string[]): number[] {
  const missing = names.filter((n) => !table.columns.includes(n));
  if (missing.length > 0) {
    throw new CsvFormatError(
      `${table.path}: missing columns ${missing.join(", ")} ` +
        `(have: ${table.columns.join(", ")})`,
    );
  }
  return names.map((n) => table.columns.indexOf(n));
}

export function requireRows(table: CsvTable): void {
  if (table.rows.length === 0) {
    throw new CsvFormatError(`${table.path}: no data rows`);
  }
}

export function numeric(table: CsvTable, col: number): number[] {
  return table.rows.map((r) => {
    const v = Number(r[col]);
    if (Number.isNaN(v)) {
      throw new CsvFormatError(
        `${table.path}: non-numeric value '${r[col]}' in column ` +
          `${table.columns[col]}`,
      );
    }
    return v;
  });
}
