/**
 * In-memory bridge to the echoprune CLI.
 *
 * Callers hand over contiguous float32 arrays plus a config mapping that
 * uses the CLI flag names verbatim; the bridge stages the arrays as
 * tensor files in a private temp directory, runs one `prune` invocation,
 * and maps the selection report back to typed arrays. Scoring has exactly
 * one implementation (the Python core); nothing numeric is recomputed here.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { PruneInputError, PruneProcessError } from "./errors";
import { encodeTensor } from "./tensor";

export { PruneInputError, PruneProcessError } from "./errors";
export { encodeTensor, decodeTensor, headerSize } from "./tensor";

/** Keys mirror the CLI flags; see `echoprune prune --help`. */
export interface PruneConfig {
  tau?: number;
  window?: number | "full";
  history?: number;
  lambda?: number;
  variant?: string;
  "keep-ratio"?: number;
  budget?: number;
}

export interface PruneResult {
  /** Number of kept tokens (B). */
  budget: number;
  /** Flat B x 3 row-major (frame, row, col). */
  indices: Int32Array;
  /** Flat B x 4 row-major (score, r, d_corr, d_echo). */
  scores: Float64Array;
  /** Parsed selection report for callers that want the full detail. */
  report: SelectionReport;
}

export interface SelectionReport {
  config: Record<string, unknown>;
  budget: number;
  first_frame_quota: number;
  kept: Array<{
    frame: number;
    row: number;
    col: number;
    score: number;
    r: number;
    d_corr: number;
    d_echo: number;
  }>;
  stats: Record<string, unknown>;
}

const CONFIG_KEYS = new Set([
  "tau",
  "window",
  "history",
  "lambda",
  "variant",
  "keep-ratio",
  "budget",
]);

function pythonCommand(): string[] {
  const override = process.env.ECHOPRUNE_PYTHON;
  if (override) {
    return override.split(" ");
  }
  return ["python3", "-m", "echoprune"];
}

function checkShape(
  what: string,
  data: Float32Array,
  shape: number[],
  rank: number
): void {
  if (!(data instanceof Float32Array)) {
    throw new PruneInputError(`${what} must be a Float32Array`);
  }
  if (shape.length !== rank) {
    throw new PruneInputError(`${what} shape must have ${rank} dims, got ${shape.length}`);
  }
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new PruneInputError(`${what} dims must be positive integers, got ${shape.join("x")}`);
    }
  }
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new PruneInputError(
      `${what} shape ${shape.join("x")} needs ${count} scalars, buffer holds ${data.length}`
    );
  }
}

function configFlags(config: PruneConfig): string[] {
  const flags: string[] = [];
  for (const [key, value] of Object.entries(config)) {
    if (!CONFIG_KEYS.has(key)) {
      throw new PruneInputError(`unknown config key "${key}"`);
    }
    if (value === undefined || value === null) {
      continue;
    }
    flags.push(`--${key}`, String(value));
  }
  return flags;
}

/**
 * Score and select tokens for one video/text pair.
 *
 * @param visual   K*H*W*D float32 scalars, row-major
 * @param visualShape  [frames, rows, cols, dim]
 * @param text     N*D float32 scalars, row-major
 * @param textShape    [count, dim]
 * @param config   flag-name keyed options; exactly one of keep-ratio / budget
 */
export function pruneArrays(
  visual: Float32Array,
  visualShape: [number, number, number, number],
  text: Float32Array,
  textShape: [number, number],
  config: PruneConfig
): PruneResult {
  checkShape("visual", visual, visualShape, 4);
  checkShape("text", text, textShape, 2);
  if (visualShape[3] !== textShape[1]) {
    throw new PruneInputError(
      `dim mismatch: visual D=${visualShape[3]}, text D=${textShape[1]}`
    );
  }
  const flags = configFlags(config);

  const dir = mkdtempSync(join(tmpdir(), "echoprune-"));
  try {
    const visualPath = join(dir, "visual.ept");
    const textPath = join(dir, "text.ept");
    const reportPath = join(dir, "report.json");
    writeFileSync(visualPath, encodeTensor(visualShape, visual));
    writeFileSync(textPath, encodeTensor(textShape, text));

    const command = pythonCommand();
    const result = spawnSync(
      command[0],
      [
        ...command.slice(1),
        "prune",
        "--visual",
        visualPath,
        "--text",
        textPath,
        "--out",
        reportPath,
        ...flags,
      ],
      { encoding: "utf-8" }
    );
    if (result.error) {
      throw new PruneProcessError("failed to start pruner", null, String(result.error));
    }
    if (result.status !== 0) {
      throw new PruneProcessError(
        "pruner failed",
        result.status,
        (result.stderr || result.stdout || "").trim()
      );
    }
    const report = JSON.parse(readFileSync(reportPath, "utf-8")) as SelectionReport;
    const kept = report.kept;
    const indices = new Int32Array(kept.length * 3);
    const scores = new Float64Array(kept.length * 4);
    kept.forEach((tok, i) => {
      indices[3 * i] = tok.frame;
      indices[3 * i + 1] = tok.row;
      indices[3 * i + 2] = tok.col;
      scores[4 * i] = tok.score;
      scores[4 * i + 1] = tok.r;
      scores[4 * i + 2] = tok.d_corr;
      scores[4 * i + 3] = tok.d_echo;
    });
    return { budget: report.budget, indices, scores, report };
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
