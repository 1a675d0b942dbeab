/**
 * Frozen convolutional backbone producing flattened feature vectors.
 *
 * The default "vgg16" topology is the classic 13-conv / 5-maxpool stack;
 * at 128x128 input the final block emits 4x4x512, flattening to 8192
 * values per image. Weights come from a local binary file when given
 * (concatenated float32 kernel+bias blocks in layer order, HWIO kernels)
 * and otherwise from a seeded deterministic generator, so extraction is
 * reproducible without any network access. Weights are never updated.
 */
import * as crypto from 'crypto'
import * as fs from 'fs'

import * as tf from '@tensorflow/tfjs'

export interface ConvBlock {
  channels: number
  convs: number
}

export const VGG16_BLOCKS: ConvBlock[] = [
  { channels: 64, convs: 2 },
  { channels: 128, convs: 2 },
  { channels: 256, convs: 3 },
  { channels: 512, convs: 3 },
  { channels: 512, convs: 3 },
]

const KERNEL = 3
const INPUT_CHANNELS = 3

export interface Backbone {
  name: string
  weightSource: string
  /** sha256 of the flat weight buffer */
  checksum: string
  kernels: tf.Tensor4D[]
  biases: tf.Tensor1D[]
  blocks: ConvBlock[]
  outputDim: number
}

interface LayerShape {
  inCh: number
  outCh: number
}

function layerShapes(blocks: ConvBlock[]): LayerShape[] {
  const shapes: LayerShape[] = []
  let inCh = INPUT_CHANNELS
  for (const block of blocks) {
    for (let i = 0; i < block.convs; i++) {
      shapes.push({ inCh, outCh: block.channels })
      inCh = block.channels
    }
  }
  return shapes
}

function totalWeightCount(blocks: ConvBlock[]): number {
  return layerShapes(blocks).reduce(
    (sum, s) => sum + KERNEL * KERNEL * s.inCh * s.outCh + s.outCh,
    0,
  )
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a |= 0
    a = (a + 0x6d2b79f5) | 0
    let t = Math.imul(a ^ (a >>> 15), 1 | a)
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

/** Uniform weights scaled to He variance (2/fan_in); biases zero. */
function generateWeights(blocks: ConvBlock[], seed: number): Float32Array {
  const rand = mulberry32(seed)
  const flat = new Float32Array(totalWeightCount(blocks))
  let offset = 0
  for (const shape of layerShapes(blocks)) {
    const fanIn = KERNEL * KERNEL * shape.inCh
    const bound = Math.sqrt(2 / fanIn) * Math.sqrt(3)
    const count = KERNEL * KERNEL * shape.inCh * shape.outCh
    for (let i = 0; i < count; i++) flat[offset + i] = (rand() * 2 - 1) * bound
    offset += count + shape.outCh // biases stay zero
  }
  return flat
}

export function outputDimFor(blocks: ConvBlock[], inputSize: number): number {
  const side = inputSize >> blocks.length
  return side * side * blocks[blocks.length - 1].channels
}

export async function initBackend(): Promise<string> {
  try {
    const wasm = await import('@tensorflow/tfjs-backend-wasm')
    const url = new URL('../node_modules/@tensorflow/tfjs-backend-wasm/dist/', import.meta.url)
    wasm.setWasmPaths(url.pathname)
    if (await tf.setBackend('wasm')) {
      await tf.ready()
      return 'wasm'
    }
  } catch {
    // fall through to the pure-JS backend
  }
  await tf.setBackend('cpu')
  await tf.ready()
  return 'cpu'
}

export function loadBackbone(options: {
  name?: string
  weightsPath?: string
  seed?: number
  inputSize?: number
}): Backbone {
  const name = options.name ?? 'vgg16'
  if (name !== 'vgg16') {
    throw new Error(`unknown backbone: ${name}`)
  }
  const blocks = VGG16_BLOCKS
  const expected = totalWeightCount(blocks)
  let flat: Float32Array
  let weightSource: string
  if (options.weightsPath) {
    const buf = fs.readFileSync(options.weightsPath)
    if (buf.length !== expected * 4) {
      throw new Error(
        `weight file holds ${buf.length / 4} float32 values, expected ${expected}`,
      )
    }
    flat = new Float32Array(buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength))
    weightSource = `file:${options.weightsPath}`
  } else {
    const seed = options.seed ?? 42
    flat = generateWeights(blocks, seed)
    weightSource = `seeded:${seed}`
  }
  const checksum = crypto
    .createHash('sha256')
    .update(Buffer.from(flat.buffer, flat.byteOffset, flat.byteLength))
    .digest('hex')

  const kernels: tf.Tensor4D[] = []
  const biases: tf.Tensor1D[] = []
  let offset = 0
  for (const shape of layerShapes(blocks)) {
    const kCount = KERNEL * KERNEL * shape.inCh * shape.outCh
    kernels.push(
      tf.tensor4d(flat.subarray(offset, offset + kCount), [KERNEL, KERNEL, shape.inCh, shape.outCh]),
    )
    offset += kCount
    biases.push(tf.tensor1d(flat.subarray(offset, offset + shape.outCh)))
    offset += shape.outCh
  }
  return {
    name,
    weightSource,
    checksum,
    kernels,
    biases,
    blocks,
    outputDim: outputDimFor(blocks, options.inputSize ?? 128),
  }
}

export function weightChecksum(backbone: Backbone): string {
  const buffers: Buffer[] = []
  for (let i = 0; i < backbone.kernels.length; i++) {
    const k = backbone.kernels[i].dataSync() as Float32Array
    const b = backbone.biases[i].dataSync() as Float32Array
    buffers.push(Buffer.from(k.buffer, k.byteOffset, k.byteLength))
    buffers.push(Buffer.from(b.buffer, b.byteOffset, b.byteLength))
  }
  return crypto.createHash('sha256').update(Buffer.concat(buffers)).digest('hex')
}

/** Flattened final-block activations, one row of outputDim per image. */
export function extractBatch(backbone: Backbone, batch: tf.Tensor4D): Float32Array {
  const out = tf.tidy(() => {
    let h: tf.Tensor4D = batch
    let layer = 0
    for (const block of backbone.blocks) {
      for (let i = 0; i < block.convs; i++) {
        h = tf.relu(tf.add(tf.conv2d(h, backbone.kernels[layer], 1, 'same'), backbone.biases[layer]))
        layer++
      }
      h = tf.maxPool(h, 2, 2, 'valid')
    }
    return tf.reshape(h, [batch.shape[0], -1])
  })
  const data = out.dataSync() as Float32Array
  out.dispose()
  return data
}

export function disposeBackbone(backbone: Backbone): void {
  backbone.kernels.forEach((t) => t.dispose())
  backbone.biases.forEach((t) => t.dispose())
}
