/**
 * Folder-to-feature-file extraction.
 *
 * Images are gathered from the input folder (optionally one level of
 * label subfolders named -1/0/1, or an explicit labels CSV), processed
 * in sorted-path order, pushed through the frozen backbone in batches,
 * and written as PUFV or CSV plus a JSON metadata sidecar describing the
 * exact preprocessing pipeline and weight provenance.
 */
import * as fs from 'fs'
import * as path from 'path'

import * as tf from '@tensorflow/tfjs'

import {
  Backbone,
  disposeBackbone,
  extractBatch,
  initBackend,
  loadBackbone,
  weightChecksum,
} from './backbone.js'
import { TARGET_SIZE, loadInputTensor } from './image.js'
import { FeatureTable, encodeCsv, encodePufv } from './pufv.js'

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg'])

export interface ExtractionSpec {
  input: string
  labelsFile?: string
  out: string
  format: 'pufv' | 'csv'
  batch: number
  backbone?: string
  weightsPath?: string
  seed?: number
}

export interface ExtractionResult {
  images: number
  skipped: number
  featureDim: number
  outPath: string
  sidecarPath: string
}

interface ImageEntry {
  file: string
  label: number
}

function isImage(name: string): boolean {
  return IMAGE_EXTENSIONS.has(path.extname(name).toLowerCase())
}

function parseLabel(text: string, context: string): number {
  const value = Number(text)
  if (![-1, 0, 1].includes(value)) {
    throw new Error(`${context}: label must be -1, 0, or 1, got ${text}`)
  }
  return value
}

export function collectImages(input: string, labelsFile?: string): ImageEntry[] {
  if (!fs.existsSync(input) || !fs.statSync(input).isDirectory()) {
    throw new Error(`input folder not found: ${input}`)
  }
  const entries: ImageEntry[] = []
  if (labelsFile) {
    const byName = new Map<string, number>()
    const lines = fs.readFileSync(labelsFile, 'utf-8').split('\n')
    for (const line of lines) {
      const trimmed = line.trim()
      if (!trimmed || trimmed.startsWith('filename')) continue
      const comma = trimmed.lastIndexOf(',')
      if (comma < 0) throw new Error(`${labelsFile}: malformed line: ${trimmed}`)
      byName.set(trimmed.slice(0, comma), parseLabel(trimmed.slice(comma + 1), labelsFile))
    }
    for (const name of fs.readdirSync(input)) {
      if (!isImage(name)) continue
      const label = byName.get(name)
      if (label === undefined) {
        throw new Error(`${labelsFile}: no label for ${name}`)
      }
      entries.push({ file: path.join(input, name), label })
    }
  } else {
    for (const name of fs.readdirSync(input)) {
      const full = path.join(input, name)
      if (fs.statSync(full).isDirectory()) {
        const label = parseLabel(name, `folder ${full}`)
        for (const inner of fs.readdirSync(full)) {
          if (isImage(inner)) entries.push({ file: path.join(full, inner), label })
        }
      } else if (isImage(name)) {
        entries.push({ file: full, label: -1 })
      }
    }
  }
  entries.sort((a, b) => (a.file < b.file ? -1 : a.file > b.file ? 1 : 0))
  return entries
}

export async function runExtraction(spec: ExtractionSpec): Promise<ExtractionResult> {
  const entries = collectImages(spec.input, spec.labelsFile)
  if (entries.length === 0) {
    throw new Error(`no images found under ${spec.input}`)
  }
  const backend = await initBackend()
  const backbone = loadBackbone({
    name: spec.backbone,
    weightsPath: spec.weightsPath,
    seed: spec.seed,
    inputSize: TARGET_SIZE,
  })
  try {
    return await extractWithBackbone(spec, entries, backbone, backend)
  } finally {
    disposeBackbone(backbone)
  }
}

async function extractWithBackbone(
  spec: ExtractionSpec,
  entries: ImageEntry[],
  backbone: Backbone,
  backend: string,
): Promise<ExtractionResult> {
  const checksumBefore = weightChecksum(backbone)
  const d = backbone.outputDim
  const rows: Float32Array[] = []
  const labels: number[] = []
  let skipped = 0

  const batchSize = Math.max(1, spec.batch)
  for (let start = 0; start < entries.length; start += batchSize) {
    const chunk = entries.slice(start, start + batchSize)
    const tensors: tf.Tensor3D[] = []
    const kept: ImageEntry[] = []
    for (const entry of chunk) {
      try {
        tensors.push(loadInputTensor(entry.file))
        kept.push(entry)
      } catch (err) {
        skipped++
        console.warn(`skipping unreadable image ${entry.file}: ${(err as Error).message}`)
      }
    }
    if (kept.length === 0) continue
    const batch = tf.stack(tensors) as tf.Tensor4D
    tensors.forEach((t) => t.dispose())
    const flat = extractBatch(backbone, batch)
    batch.dispose()
    for (let i = 0; i < kept.length; i++) {
      rows.push(flat.slice(i * d, (i + 1) * d))
      labels.push(kept[i].label)
    }
  }

  if (rows.length === 0) {
    throw new Error(`all ${entries.length} images failed to decode`)
  }
  const checksumAfter = weightChecksum(backbone)
  if (checksumAfter !== checksumBefore) {
    throw new Error('backbone weights changed during extraction')
  }

  const table: FeatureTable = {
    n: rows.length,
    d,
    features: concatRows(rows, d),
    labels: Int8Array.from(labels),
  }
  fs.mkdirSync(path.dirname(path.resolve(spec.out)), { recursive: true })
  if (spec.format === 'pufv') {
    fs.writeFileSync(spec.out, encodePufv(table))
  } else {
    fs.writeFileSync(spec.out, encodeCsv(table))
  }

  const sidecarPath = spec.out + '.meta.json'
  const sidecar = {
    backbone: backbone.name,
    weight_source: backbone.weightSource,
    weight_checksum: checksumBefore,
    backend,
    input_size: [TARGET_SIZE, TARGET_SIZE],
    feature_dim: d,
    images: rows.length,
    skipped,
    label_source: spec.labelsFile ? `file:${spec.labelsFile}` : 'folders',
    preprocessing: [
      'decode to RGB',
      `bilinear resize to ${TARGET_SIZE}x${TARGET_SIZE}`,
      'scale intensities to [0,1] (no mean centering)',
      'flatten final convolutional block output',
    ],
  }
  fs.writeFileSync(sidecarPath, JSON.stringify(sidecar, null, 2) + '\n')

  return { images: rows.length, skipped, featureDim: d, outPath: spec.out, sidecarPath }
}

function concatRows(rows: Float32Array[], d: number): Float32Array {
  const out = new Float32Array(rows.length * d)
  rows.forEach((row, i) => out.set(row, i * d))
  return out
}
