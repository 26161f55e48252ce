/**
 * Binary tensor encoding shared with the pruner CLI.
 *
 * Layout (little-endian): "EPT1", version u8, dtype u8 (1 = float32),
 * rank u8, pad u8, dims as u64 each, then the row-major float32 payload.
 */

const MAGIC = "EPT1";
const VERSION = 1;
const DTYPE_FLOAT32 = 1;

export function headerSize(rank: number): number {
  return 8 + 8 * rank;
}

export function encodeTensor(dims: number[], data: Float32Array): Buffer {
  const count = dims.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`dims ${dims.join("x")} do not match ${data.length} scalars`);
  }
  const buf = Buffer.allocUnsafe(headerSize(dims.length) + 4 * count);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt8(VERSION, 4);
  buf.writeUInt8(DTYPE_FLOAT32, 5);
  buf.writeUInt8(dims.length, 6);
  buf.writeUInt8(0, 7);
  dims.forEach((dim, i) => buf.writeBigUInt64LE(BigInt(dim), 8 + 8 * i));
  const base = headerSize(dims.length);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(data[i], base + 4 * i);
  }
  return buf;
}

export function decodeTensor(buf: Buffer): { dims: number[]; data: Float32Array } {
  if (buf.length < 8 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error("bad magic");
  }
  const rank = buf.readUInt8(6);
  const dims: number[] = [];
  for (let i = 0; i < rank; i++) {
    dims.push(Number(buf.readBigUInt64LE(8 + 8 * i)));
  }
  const count = dims.reduce((a, b) => a * b, 1);
  const base = headerSize(rank);
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(base + 4 * i);
  }
  return { dims, data };
}
