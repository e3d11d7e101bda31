/**
 * Wire codec built from a dialect file at runtime.
 *
 * Mirrors the simulator's framing contract (see docs/wire_format.md):
 * stx 0xFE | len | seq | sys | comp | msg | payload | crc16 LE, with the
 * CRC-16/MCRF4XX running over len..payload plus the message's crc_extra.
 * Reimplemented independently on purpose — the dialect file is the single
 * source of truth shared with the simulator.
 */

export const STX = 0xfe;
export const FRAME_OVERHEAD = 8;

export function crc16(data: Uint8Array, crc = 0xffff): number {
  for (const byte of data) {
    let tmp = byte ^ (crc & 0xff);
    tmp = (tmp ^ (tmp << 4)) & 0xff;
    crc = ((crc >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4)) & 0xffff;
  }
  return crc;
}

const ascii = new TextEncoder();

type BaseType = "u8" | "i8" | "u16" | "i16" | "u32" | "i32" | "u64" | "i64" | "f32" | "f64";

const TYPE_SIZES: Record<BaseType, number> = {
  u8: 1, i8: 1, u16: 2, i16: 2, u32: 4, i32: 4, u64: 8, i64: 8, f32: 4, f64: 8,
};

export interface FieldSpec {
  name: string;
  typeName: string; // as declared, e.g. "u8[50]"
  base: BaseType;
  count: number;
}

export interface MessageSchema {
  id: number;
  name: string;
  fields: FieldSpec[];
  payloadLen: number;
  crcExtra: number;
}

export type FieldValue = number | bigint | Array<number | bigint>;
export type MessageValues = Record<string, FieldValue>;

export function crcExtraFor(name: string, fields: Array<[string, string]>): number {
  const tokens = [name];
  for (const [fieldName, typeName] of fields) {
    tokens.push(typeName, fieldName);
  }
  const value = crc16(ascii.encode(tokens.join(" ")));
  return ((value >> 8) ^ value) & 0xff;
}

function parseType(typeName: string): { base: BaseType; count: number } {
  const m = /^([a-z0-9]+)(?:\[(\d+)\])?$/.exec(typeName);
  if (!m || !(m[1] in TYPE_SIZES)) {
    throw new Error(`unknown wire type ${typeName}`);
  }
  return { base: m[1] as BaseType, count: m[2] ? parseInt(m[2], 10) : 1 };
}

/** Parse dialect XML without a DOM so the same code runs in Node tests. */
export function parseDialect(xml: string): Registry {
  const schemas: MessageSchema[] = [];
  const messageRe = /<message\s+([^>]*?)>([\s\S]*?)<\/message>/g;
  const fieldRe = /<field\s+([^/>]*?)\/>/g;
  let m: RegExpExecArray | null;
  while ((m = messageRe.exec(xml)) !== null) {
    const attrs = parseAttrs(m[1]);
    const fields: FieldSpec[] = [];
    let f: RegExpExecArray | null;
    fieldRe.lastIndex = 0;
    const body = m[2];
    while ((f = fieldRe.exec(body)) !== null) {
      const fa = parseAttrs(f[1]);
      const { base, count } = parseType(fa.type);
      fields.push({ name: fa.name, typeName: fa.type, base, count });
    }
    const payloadLen = fields.reduce((n, fs) => n + TYPE_SIZES[fs.base] * fs.count, 0);
    if (payloadLen > 255) {
      throw new Error(`message ${attrs.name}: payload ${payloadLen} exceeds 255`);
    }
    schemas.push({
      id: parseInt(attrs.id, 10),
      name: attrs.name,
      fields,
      payloadLen,
      crcExtra: crcExtraFor(attrs.name, fields.map((fs) => [fs.name, fs.typeName])),
    });
  }
  return new Registry(schemas);
}

function parseAttrs(text: string): Record<string, string> {
  const out: Record<string, string> = {};
  const re = /(\w+)="([^"]*)"/g;
  let m: RegExpExecArray | null;
  while ((m = re.exec(text)) !== null) {
    out[m[1]] = m[2];
  }
  return out;
}

export class Registry {
  byId = new Map<number, MessageSchema>();
  byName = new Map<string, MessageSchema>();

  constructor(schemas: MessageSchema[]) {
    for (const schema of schemas) {
      if (this.byId.has(schema.id)) {
        throw new Error(`duplicate message id ${schema.id}`);
      }
      this.byId.set(schema.id, schema);
      this.byName.set(schema.name, schema);
    }
  }

  schema(key: string | number): MessageSchema {
    const schema = typeof key === "number" ? this.byId.get(key) : this.byName.get(key);
    if (!schema) {
      throw new Error(`unknown message ${key}`);
    }
    return schema;
  }
}

function writeScalar(view: DataView, offset: number, base: BaseType, v: number | bigint): number {
  switch (base) {
    case "u8": view.setUint8(offset, Number(v)); return 1;
    case "i8": view.setInt8(offset, Number(v)); return 1;
    case "u16": view.setUint16(offset, Number(v), true); return 2;
    case "i16": view.setInt16(offset, Number(v), true); return 2;
    case "u32": view.setUint32(offset, Number(v), true); return 4;
    case "i32": view.setInt32(offset, Number(v), true); return 4;
    case "u64": view.setBigUint64(offset, BigInt(v), true); return 8;
    case "i64": view.setBigInt64(offset, BigInt(v), true); return 8;
    case "f32": view.setFloat32(offset, Number(v), true); return 4;
    case "f64": view.setFloat64(offset, Number(v), true); return 8;
  }
}

function readScalar(view: DataView, offset: number, base: BaseType): [number | bigint, number] {
  switch (base) {
    case "u8": return [view.getUint8(offset), 1];
    case "i8": return [view.getInt8(offset), 1];
    case "u16": return [view.getUint16(offset, true), 2];
    case "i16": return [view.getInt16(offset, true), 2];
    case "u32": return [view.getUint32(offset, true), 4];
    case "i32": return [view.getInt32(offset, true), 4];
    case "u64": return [view.getBigUint64(offset, true), 8];
    case "i64": return [view.getBigInt64(offset, true), 8];
    case "f32": return [view.getFloat32(offset, true), 4];
    case "f64": return [view.getFloat64(offset, true), 8];
  }
}

export function packPayload(schema: MessageSchema, values: MessageValues): Uint8Array {
  const out = new Uint8Array(schema.payloadLen);
  const view = new DataView(out.buffer);
  let offset = 0;
  for (const field of schema.fields) {
    const v = values[field.name];
    if (v === undefined) {
      throw new Error(`${schema.name}: missing field ${field.name}`);
    }
    if (field.count === 1) {
      offset += writeScalar(view, offset, field.base, v as number | bigint);
    } else {
      const items = v as Array<number | bigint>;
      if (items.length !== field.count) {
        throw new Error(`${schema.name}.${field.name}: expected ${field.count} items`);
      }
      for (const item of items) {
        offset += writeScalar(view, offset, field.base, item);
      }
    }
  }
  return out;
}

export function unpackPayload(schema: MessageSchema, payload: Uint8Array): MessageValues {
  if (payload.length !== schema.payloadLen) {
    throw new Error(`${schema.name}: payload length ${payload.length} != ${schema.payloadLen}`);
  }
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  const values: MessageValues = {};
  let offset = 0;
  for (const field of schema.fields) {
    if (field.count === 1) {
      const [v, n] = readScalar(view, offset, field.base);
      values[field.name] = v;
      offset += n;
    } else {
      const items: Array<number | bigint> = [];
      for (let i = 0; i < field.count; i += 1) {
        const [v, n] = readScalar(view, offset, field.base);
        items.push(v);
        offset += n;
      }
      values[field.name] = items;
    }
  }
  return values;
}

export function encodeText(text: string, length: number): number[] {
  const raw = ascii.encode(text).slice(0, length);
  const out = new Array<number>(length).fill(0);
  raw.forEach((b, i) => { out[i] = b; });
  return out;
}

export function decodeText(values: Array<number | bigint>): string {
  const bytes: number[] = [];
  for (const v of values) {
    const b = Number(v);
    if (b === 0) break;
    bytes.push(b);
  }
  return new TextDecoder().decode(new Uint8Array(bytes));
}

export interface DecodedFrame {
  seq: number;
  sysId: number;
  compId: number;
  msgId: number;
  name: string;
  values: MessageValues;
  raw: Uint8Array;
}

export class FrameEncoder {
  private seq = 0;

  constructor(private registry: Registry, private sysId = 255, private compId = 255) {}

  encode(message: string | number, values: MessageValues): Uint8Array {
    const schema = this.registry.schema(message);
    const payload = packPayload(schema, values);
    const raw = new Uint8Array(payload.length + FRAME_OVERHEAD);
    raw.set([STX, payload.length, this.seq, this.sysId, this.compId, schema.id], 0);
    raw.set(payload, 6);
    let crc = crc16(raw.subarray(1, raw.length - 2));
    crc = crc16(new Uint8Array([schema.crcExtra]), crc);
    raw[raw.length - 2] = crc & 0xff;
    raw[raw.length - 1] = crc >> 8;
    this.seq = (this.seq + 1) & 0xff;
    return raw;
  }
}

export interface LinkStats {
  framesOk: number;
  framesBadCrc: number;
  framesDropped: number;
  bytesSeen: number;
}

export class FrameDecoder {
  stats: LinkStats = { framesOk: 0, framesBadCrc: 0, framesDropped: 0, bytesSeen: 0 };
  private buf = new Uint8Array(0);
  private lastSeq = new Map<number, number>();

  constructor(private registry: Registry) {}

  feed(data: Uint8Array): DecodedFrame[] {
    this.stats.bytesSeen += data.length;
    const merged = new Uint8Array(this.buf.length + data.length);
    merged.set(this.buf, 0);
    merged.set(data, this.buf.length);
    this.buf = merged;
    return this.scan(false);
  }

  flush(): DecodedFrame[] {
    const frames = this.scan(true);
    this.buf = new Uint8Array(0);
    return frames;
  }

  private scan(final: boolean): DecodedFrame[] {
    const frames: DecodedFrame[] = [];
    let pos = 0;
    for (;;) {
      const start = this.buf.indexOf(STX, pos);
      if (start < 0) {
        pos = this.buf.length;
        break;
      }
      if (this.buf.length - start < 2) {
        pos = final ? this.buf.length : start;
        break;
      }
      const end = start + FRAME_OVERHEAD + this.buf[start + 1];
      if (end > this.buf.length) {
        if (final) {
          pos = start + 1;
          continue;
        }
        pos = start;
        break;
      }
      const frame = this.validate(this.buf.subarray(start, end));
      if (frame === null) {
        this.stats.framesBadCrc += 1;
        pos = start + 1;
      } else {
        this.account(frame);
        frames.push(frame);
        pos = end;
      }
    }
    this.buf = this.buf.slice(pos);
    return frames;
  }

  private validate(raw: Uint8Array): DecodedFrame | null {
    const schema = this.registry.byId.get(raw[5]);
    if (!schema || schema.payloadLen !== raw[1]) {
      return null;
    }
    let crc = crc16(raw.subarray(1, raw.length - 2));
    crc = crc16(new Uint8Array([schema.crcExtra]), crc);
    if (crc !== (raw[raw.length - 2] | (raw[raw.length - 1] << 8))) {
      return null;
    }
    const copy = raw.slice();
    return {
      seq: raw[2],
      sysId: raw[3],
      compId: raw[4],
      msgId: raw[5],
      name: schema.name,
      values: unpackPayload(schema, copy.subarray(6, copy.length - 2)),
      raw: copy,
    };
  }

  private account(frame: DecodedFrame): void {
    this.stats.framesOk += 1;
    const key = (frame.sysId << 8) | frame.compId;
    const last = this.lastSeq.get(key);
    if (last !== undefined) {
      this.stats.framesDropped += (frame.seq - last - 1) & 0xff;
    }
    this.lastSeq.set(key, frame.seq);
  }
}
