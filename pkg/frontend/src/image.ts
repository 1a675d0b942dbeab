/**
 * Image decoding to RGB float tensors in [0, 1].
 *
 * PNG and JPEG are decoded in pure JS (pngjs / jpeg-js), resized with
 * bilinear interpolation to the working resolution, and scaled by 1/255.
 * No mean centering: downstream models consume raw [0, 1] intensities.
 */
import * as fs from 'fs'
import * as path from 'path'

import * as tf from '@tensorflow/tfjs'
import jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export const TARGET_SIZE = 128

export function decodeImage(filePath: string): { data: Uint8Array; width: number; height: number } {
  const raw = fs.readFileSync(filePath)
  const ext = path.extname(filePath).toLowerCase()
  if (ext === '.png') {
    const png = PNG.sync.read(raw)
    return { data: new Uint8Array(png.data), width: png.width, height: png.height }
  }
  if (ext === '.jpg' || ext === '.jpeg') {
    const img = jpeg.decode(raw, { useTArray: true, formatAsRGBA: true })
    return { data: img.data, width: img.width, height: img.height }
  }
  throw new Error(`unsupported image type: ${filePath}`)
}

/** RGBA bytes -> [TARGET_SIZE, TARGET_SIZE, 3] float32 tensor in [0, 1]. */
export function toInputTensor(image: { data: Uint8Array; width: number; height: number }): tf.Tensor3D {
  const { data, width, height } = image
  const rgb = new Float32Array(width * height * 3)
  for (let i = 0, j = 0; i < data.length; i += 4, j += 3) {
    rgb[j] = data[i]
    rgb[j + 1] = data[i + 1]
    rgb[j + 2] = data[i + 2]
  }
  return tf.tidy(() => {
    let t = tf.tensor3d(rgb, [height, width, 3])
    if (width !== TARGET_SIZE || height !== TARGET_SIZE) {
      t = tf.image.resizeBilinear(t, [TARGET_SIZE, TARGET_SIZE])
    }
    return t.div(255) as tf.Tensor3D
  })
}

export function loadInputTensor(filePath: string): tf.Tensor3D {
  return toInputTensor(decodeImage(filePath))
}
