/**
 * Writers for the toolkit's feature-file formats.
 *
 * PUFV binary layout: magic "PUFV", u32-LE version (=1), u64-LE n,
 * u64-LE d, one label-presence byte, n*d float32-LE features row-major,
 * then n signed label bytes when present. No padding.
 */

const MAGIC = Buffer.from('PUFV', 'ascii')
const VERSION = 1

export interface FeatureTable {
  n: number
  d: number
  /** row-major, length n*d */
  features: Float32Array
  /** -1 unlabeled, 0 negative, 1 positive; omit for a label-free file */
  labels?: Int8Array
}

export function encodePufv(table: FeatureTable): Buffer {
  const { n, d, features, labels } = table
  if (features.length !== n * d) {
    throw new Error(`feature buffer length ${features.length} != n*d = ${n * d}`)
  }
  if (labels && labels.length !== n) {
    throw new Error(`label count ${labels.length} != n = ${n}`)
  }
  const header = Buffer.alloc(4 + 4 + 8 + 8 + 1)
  MAGIC.copy(header, 0)
  header.writeUInt32LE(VERSION, 4)
  header.writeBigUInt64LE(BigInt(n), 8)
  header.writeBigUInt64LE(BigInt(d), 16)
  header.writeUInt8(labels ? 1 : 0, 24)
  const body = Buffer.from(features.buffer, features.byteOffset, features.byteLength)
  const parts = [header, body]
  if (labels) {
    parts.push(Buffer.from(labels.buffer, labels.byteOffset, labels.byteLength))
  }
  return Buffer.concat(parts)
}

export function encodeCsv(table: FeatureTable): string {
  const { n, d, features, labels } = table
  const header = ['id', 'label']
  for (let j = 0; j < d; j++) header.push(`f${j}`)
  const lines = [header.join(',')]
  for (let i = 0; i < n; i++) {
    const label = labels ? labels[i] : -1
    const cells = new Array<string>(d + 2)
    cells[0] = String(i)
    cells[1] = String(label)
    for (let j = 0; j < d; j++) cells[j + 2] = String(features[i * d + j])
    lines.push(cells.join(','))
  }
  return lines.join('\n') + '\n'
}

/** Header fields of a PUFV buffer; used by tests to validate outputs. */
export function decodePufvHeader(buf: Buffer): { n: number; d: number; hasLabels: boolean } {
  if (buf.length < 25 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error('not a PUFV buffer')
  }
  if (buf.readUInt32LE(4) !== VERSION) {
    throw new Error('unsupported PUFV version')
  }
  return {
    n: Number(buf.readBigUInt64LE(8)),
    d: Number(buf.readBigUInt64LE(16)),
    hasLabels: buf.readUInt8(24) === 1,
  }
}
