/** Host-side input validation failed before any subprocess ran. */
export class PruneInputError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "PruneInputError";
  }
}

/** The pruner process exited non-zero; `detail` carries its stderr. */
export class PruneProcessError extends Error {
  readonly exitCode: number | null;
  readonly detail: string;

  constructor(message: string, exitCode: number | null, detail: string) {
    super(detail ? `${message}: ${detail}` : message);
    this.name = "PruneProcessError";
    this.exitCode = exitCode;
    this.detail = detail;
  }
}
