/**
 * Codec interop against the simulator's committed golden fixtures: encoded
 * frames must match byte-for-byte, and a recorded tlog must decode with
 * zero CRC failures.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  FrameDecoder,
  FrameEncoder,
  MessageValues,
  crc16,
  decodeText,
  encodeText,
  packPayload,
  parseDialect,
  unpackPayload,
} from "../src/codec.js";

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, "..", "..");
const dialectXml = readFileSync(
  join(repoRoot, "src", "hexsim", "data", "core_dialect.xml"), "utf-8");
const golden = JSON.parse(
  readFileSync(join(here, "fixtures", "golden.json"), "utf-8"));

const registry = parseDialect(dialectXml);

function goldenValues(raw: Record<string, unknown>): MessageValues {
  const out: MessageValues = {};
  for (const [key, value] of Object.entries(raw)) {
    if (typeof value === "string") {
      out[key] = BigInt(value);
    } else {
      out[key] = value as number | number[];
    }
  }
  return out;
}

describe("crc", () => {
  it("matches the catalogue check value", () => {
    expect(crc16(new TextEncoder().encode("123456789")).toString(16))
      .toBe(golden.crc_check_value);
  });
});

describe("dialect", () => {
  it("derives identical crc_extra bytes from the shared dialect file", () => {
    for (const [name, extra] of Object.entries(golden.crc_extra)) {
      expect(registry.schema(name).crcExtra, name).toBe(extra);
    }
  });

  it("derives identical payload lengths", () => {
    for (const [name, len] of Object.entries(golden.payload_len)) {
      expect(registry.schema(name).payloadLen, name).toBe(len);
    }
  });
});

describe("golden frames", () => {
  it("encodes command frames byte-identical to the simulator", () => {
    const encoder = new FrameEncoder(registry, 255, 255);
    for (const frame of golden.frames) {
      const raw = encoder.encode(frame.name, goldenValues(frame.values));
      expect(Buffer.from(raw).toString("hex"), frame.name).toBe(frame.hex);
    }
  });

  it("decodes every golden frame back to its values", () => {
    const decoder = new FrameDecoder(registry);
    for (const frame of golden.frames) {
      const [decoded] = decoder.feed(Buffer.from(frame.hex, "hex"));
      expect(decoded.name).toBe(frame.name);
      expect(decoded.sysId).toBe(frame.sys_id);
      const expected = goldenValues(frame.values);
      for (const [key, value] of Object.entries(expected)) {
        const got = decoded.values[key];
        if (typeof got === "bigint") {
          expect(got).toBe(BigInt(value as number | bigint));
        } else if (typeof value === "number" && !Number.isInteger(value)) {
          expect(Math.abs((got as number) - value)).toBeLessThan(1e-5);
        } else if (Array.isArray(value)) {
          expect(got).toEqual(value);
        } else {
          expect(got).toBe(value);
        }
      }
    }
    expect(decoder.stats.framesBadCrc).toBe(0);
  });
});

describe("recorded tlog", () => {
  it("decodes with zero CRC failures and full frame recovery", () => {
    const data = readFileSync(join(here, "fixtures", "sample.tlog"));
    const decoder = new FrameDecoder(registry);
    let records = 0;
    let frames = 0;
    let offset = 0;
    while (offset + 9 <= data.length) {
      offset += 8; // timestamp
      const length = data[offset + 1] + 8;
      frames += decoder.feed(
        new Uint8Array(data.subarray(offset, offset + length))).length;
      records += 1;
      offset += length;
    }
    expect(records).toBeGreaterThan(0);
    expect(frames).toBe(records);
    expect(decoder.stats.framesBadCrc).toBe(0);
    expect(decoder.stats.framesDropped).toBe(0);
  });
});

describe("round trips and resync", () => {
  it("pack/unpack round-trips random values for every message", () => {
    let seed = 1234;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      return seed / 0x7fffffff;
    };
    for (const [name] of registry.byName) {
      const schema = registry.schema(name);
      const values: MessageValues = {};
      for (const field of schema.fields) {
        const one = () => {
          switch (field.base) {
            case "f32": return Math.fround(rand() * 2000 - 1000);
            case "f64": return rand() * 2e6 - 1e6;
            case "u64": return BigInt(Math.floor(rand() * 2 ** 52));
            case "i64": return BigInt(Math.floor(rand() * 2 ** 52)) - 2n ** 51n;
            case "u8": return Math.floor(rand() * 256);
            case "i8": return Math.floor(rand() * 256) - 128;
            case "u16": return Math.floor(rand() * 65536);
            case "i16": return Math.floor(rand() * 65536) - 32768;
            case "u32": return Math.floor(rand() * 2 ** 32);
            case "i32": return Math.floor(rand() * 2 ** 32) - 2 ** 31;
          }
        };
        values[field.name] = field.count === 1
          ? one() : Array.from({ length: field.count }, one);
      }
      const unpacked = unpackPayload(schema, packPayload(schema, values));
      expect(unpacked).toEqual(values);
    }
  });

  it("overhead is exactly eight bytes for every message", () => {
    const encoder = new FrameEncoder(registry);
    for (const [name] of registry.byName) {
      const schema = registry.schema(name);
      const values: MessageValues = {};
      for (const field of schema.fields) {
        const zero = field.base === "u64" || field.base === "i64" ? 0n : 0;
        values[field.name] = field.count === 1
          ? zero : new Array(field.count).fill(zero);
      }
      const raw = encoder.encode(name, values);
      expect(raw.length - schema.payloadLen).toBe(8);
    }
  });

  it("resynchronizes through garbage and counts bad CRC", () => {
    const encoder = new FrameEncoder(registry);
    const decoder = new FrameDecoder(registry);
    const good = encoder.encode("SET_MODE", { target_system: 1, mode: 3 });
    const corrupt = Uint8Array.from(
      encoder.encode("SET_MODE", { target_system: 1, mode: 4 }));
    corrupt[corrupt.length - 1] ^= 0xff;
    const tail = encoder.encode("SET_MODE", { target_system: 1, mode: 5 });
    const garbage = Uint8Array.from({ length: 40 }, (_v, i) => (i * 37) & 0xff);
    const stream = new Uint8Array([
      ...garbage, ...good, ...corrupt, ...tail]);
    const frames = [...decoder.feed(stream), ...decoder.flush()];
    expect(frames.map((f) => f.values.mode)).toEqual([3, 5]);
    expect(decoder.stats.framesBadCrc).toBeGreaterThanOrEqual(1);
  });

  it("counts sequence gaps as drops", () => {
    const encoder = new FrameEncoder(registry);
    const decoder = new FrameDecoder(registry);
    const frames = Array.from({ length: 5 }, () =>
      encoder.encode("SET_MODE", { target_system: 1, mode: 0 }));
    for (const i of [0, 1, 2, 4]) {
      decoder.feed(frames[i]);
    }
    expect(decoder.stats.framesOk).toBe(4);
    expect(decoder.stats.framesDropped).toBe(1);
  });

  it("text helpers round-trip", () => {
    expect(decodeText(encodeText("fence breach: rtl", 50)))
      .toBe("fence breach: rtl");
  });
});
