/**
 * Minimal RFC 6455 client over node:net for test use (Node 20 ships no
 * WebSocket global). Presents the same surface GcsClient expects from a
 * browser WebSocket: binaryType/onopen/onmessage/onclose/send/close.
 */

import { createHash, randomBytes } from "node:crypto";
import { Socket, connect } from "node:net";

import { SocketLike } from "../src/client.js";

const GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

export class NodeWebSocket implements SocketLike {
  binaryType = "arraybuffer";
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: ArrayBuffer }) => void) | null = null;

  private sock: Socket;
  private buf = Buffer.alloc(0);
  private upgraded = false;

  constructor(url: string) {
    const u = new URL(url);
    const key = randomBytes(16).toString("base64");
    this.sock = connect(Number(u.port), u.hostname, () => {
      this.sock.write(
        `GET ${u.pathname} HTTP/1.1\r\n` +
        `Host: ${u.host}\r\n` +
        "Upgrade: websocket\r\nConnection: Upgrade\r\n" +
        `Sec-WebSocket-Key: ${key}\r\n` +
        "Sec-WebSocket-Version: 13\r\n\r\n");
    });
    const accept = createHash("sha1").update(key + GUID).digest("base64");
    this.sock.on("data", (data) => this.onData(data, accept));
    this.sock.on("close", () => this.onclose?.());
    this.sock.on("error", (err) => this.onerror?.(err));
  }

  private onData(data: Buffer, accept: string): void {
    this.buf = Buffer.concat([this.buf, data]);
    if (!this.upgraded) {
      const end = this.buf.indexOf("\r\n\r\n");
      if (end < 0) return;
      const header = this.buf.subarray(0, end).toString();
      this.buf = this.buf.subarray(end + 4);
      if (!header.includes("101") || !header.includes(accept)) {
        this.onerror?.(new Error("websocket upgrade refused"));
        this.sock.destroy();
        return;
      }
      this.upgraded = true;
      this.onopen?.();
    }
    this.drainFrames();
  }

  private drainFrames(): void {
    for (;;) {
      if (this.buf.length < 2) return;
      const opcode = this.buf[0] & 0x0f;
      const masked = (this.buf[1] & 0x80) !== 0;
      let length = this.buf[1] & 0x7f;
      let offset = 2;
      if (length === 126) {
        if (this.buf.length < 4) return;
        length = this.buf.readUInt16BE(2);
        offset = 4;
      } else if (length === 127) {
        if (this.buf.length < 10) return;
        length = Number(this.buf.readBigUInt64BE(2));
        offset = 10;
      }
      const maskLen = masked ? 4 : 0;
      if (this.buf.length < offset + maskLen + length) return;
      let payload = this.buf.subarray(offset + maskLen, offset + maskLen + length);
      if (masked) {
        const mask = this.buf.subarray(offset, offset + 4);
        payload = Buffer.from(payload.map((b, i) => b ^ mask[i % 4]));
      }
      this.buf = this.buf.subarray(offset + maskLen + length);
      if (opcode === 0x8) {
        this.sock.end();
        return;
      }
      if (opcode === 0x9) {
        this.sendRaw(payload, 0xa);
        continue;
      }
      if (opcode === 0x1 || opcode === 0x2) {
        const copy = payload.buffer.slice(
          payload.byteOffset, payload.byteOffset + payload.byteLength);
        this.onmessage?.({ data: copy as ArrayBuffer });
      }
    }
  }

  send(data: Uint8Array): void {
    this.sendRaw(Buffer.from(data), 0x2);
  }

  private sendRaw(payload: Buffer, opcode: number): void {
    // client frames must be masked
    const mask = randomBytes(4);
    const masked = Buffer.from(payload.map((b, i) => b ^ mask[i % 4]));
    let header: Buffer;
    if (payload.length < 126) {
      header = Buffer.from([0x80 | opcode, 0x80 | payload.length]);
    } else if (payload.length < 65536) {
      header = Buffer.alloc(4);
      header[0] = 0x80 | opcode;
      header[1] = 0x80 | 126;
      header.writeUInt16BE(payload.length, 2);
    } else {
      header = Buffer.alloc(10);
      header[0] = 0x80 | opcode;
      header[1] = 0x80 | 127;
      header.writeBigUInt64BE(BigInt(payload.length), 2);
    }
    this.sock.write(Buffer.concat([header, mask, masked]));
  }

  close(): void {
    this.sock.destroy();
    this.onclose?.();
  }
}
