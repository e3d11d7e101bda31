/** Reassembles VISION_FRAME chunks into a small grayscale preview. */

import { DecodedFrame } from "./codec.js";

export class VisionPanel {
  private chunks = new Map<number, Map<number, Uint8Array>>();
  lastFrameSeq: number | null = null;

  constructor(private canvas: HTMLCanvasElement | null) {}

  /** Returns assembled pixels when a frame completes (also drawn if canvas). */
  apply(frame: DecodedFrame): Uint8Array | null {
    if (frame.name !== "VISION_FRAME") return null;
    const v = frame.values as Record<string, number>;
    const data = frame.values.data as number[];
    const seq = v.frame_seq;
    let parts = this.chunks.get(seq);
    if (!parts) {
      parts = new Map();
      this.chunks.set(seq, parts);
      if (this.chunks.size > 4) {  // drop stale partial frames
        const oldest = Math.min(...this.chunks.keys());
        if (oldest !== seq) this.chunks.delete(oldest);
      }
    }
    parts.set(v.chunk_index, Uint8Array.from(data));
    if (parts.size < v.chunk_count) return null;

    const w = v.width_px;
    const h = v.height_px;
    const pixels = new Uint8Array(v.chunk_count * data.length);
    for (let i = 0; i < v.chunk_count; i += 1) {
      const chunk = parts.get(i);
      if (!chunk) return null;
      pixels.set(chunk, i * data.length);
    }
    const image = pixels.subarray(0, w * h);
    this.chunks.delete(seq);
    this.lastFrameSeq = seq;
    this.draw(image, w, h);
    return image;
  }

  private draw(pixels: Uint8Array, w: number, h: number): void {
    const ctx = this.canvas?.getContext("2d");
    if (!ctx || !this.canvas) return;
    const img = ctx.createImageData(w, h);
    for (let i = 0; i < w * h; i += 1) {
      img.data[4 * i] = pixels[i];
      img.data[4 * i + 1] = pixels[i];
      img.data[4 * i + 2] = pixels[i];
      img.data[4 * i + 3] = 255;
    }
    createImageBitmap(img).then((bmp) => {
      ctx.imageSmoothingEnabled = false;
      ctx.drawImage(bmp, 0, 0, this.canvas!.width, this.canvas!.height);
    });
  }
}
