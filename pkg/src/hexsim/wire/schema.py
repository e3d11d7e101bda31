"""Dialect file parsing and the message schema registry.

Dialect files are XML: a <dialect> root with <message id= name=> elements
holding ordered <field type= name=> children. Wire types are u8..u64,
i8..i64, f32, f64 and fixed arrays like u8[50]. Payloads are encoded
little-endian in declared order.
"""

import re
import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources

from .crc import crc_extra_for

MAX_PAYLOAD = 255

_BASE_TYPES = {
    "u8": "B", "i8": "b",
    "u16": "H", "i16": "h",
    "u32": "I", "i32": "i",
    "u64": "Q", "i64": "q",
    "f32": "f", "f64": "d",
}
_TYPE_RE = re.compile(r"^([a-z0-9]+)(?:\[(\d+)\])?$")


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class FieldSpec:
    name: str
    type_name: str  # declared form, e.g. "f32" or "u8[50]"
    base: str
    count: int  # 1 for scalars

    @property
    def is_array(self) -> bool:
        return "[" in self.type_name

    @property
    def size(self) -> int:
        return struct.calcsize("<" + _BASE_TYPES[self.base]) * self.count


def _parse_type(type_name: str, msg_name: str, field_name: str) -> tuple:
    m = _TYPE_RE.match(type_name)
    if not m or m.group(1) not in _BASE_TYPES:
        raise SchemaError(f"message {msg_name}: field {field_name} has unknown type {type_name!r}")
    count = int(m.group(2)) if m.group(2) else 1
    if count < 1:
        raise SchemaError(f"message {msg_name}: field {field_name} has zero-length array")
    return m.group(1), count


@dataclass(frozen=True)
class MessageSchema:
    msg_id: int
    name: str
    fields: tuple  # tuple[FieldSpec]
    crc_extra: int
    payload_len: int
    _struct: struct.Struct

    @classmethod
    def build(cls, msg_id: int, name: str, raw_fields) -> "MessageSchema":
        if not 0 <= msg_id <= 255:
            raise SchemaError(f"message {name}: id {msg_id} out of u8 range")
        fields = []
        seen = set()
        for field_name, type_name in raw_fields:
            if field_name in seen:
                raise SchemaError(f"message {name}: duplicate field {field_name}")
            seen.add(field_name)
            base, count = _parse_type(type_name, name, field_name)
            fields.append(FieldSpec(field_name, type_name, base, count))
        payload_len = sum(f.size for f in fields)
        if payload_len > MAX_PAYLOAD:
            raise SchemaError(
                f"message {name}: payload {payload_len} exceeds {MAX_PAYLOAD} bytes")
        fmt = "<" + "".join(_BASE_TYPES[f.base] * f.count for f in fields)
        extra = crc_extra_for(name, [(f.name, f.type_name) for f in fields])
        return cls(msg_id, name, tuple(fields), extra, payload_len, struct.Struct(fmt))


class Registry:
    """Message schemas of one dialect, keyed by id and by name."""

    def __init__(self, schemas, dialect_name: str = ""):
        self.dialect_name = dialect_name
        self.by_id = {}
        self.by_name = {}
        for schema in schemas:
            if schema.msg_id in self.by_id:
                raise SchemaError(
                    f"duplicate message id {schema.msg_id} "
                    f"({self.by_id[schema.msg_id].name} vs {schema.name})")
            if schema.name in self.by_name:
                raise SchemaError(f"duplicate message name {schema.name}")
            self.by_id[schema.msg_id] = schema
            self.by_name[schema.name] = schema

    def schema(self, key) -> MessageSchema:
        table = self.by_id if isinstance(key, int) else self.by_name
        if key not in table:
            raise SchemaError(f"unknown message {key!r}")
        return table[key]

    def __contains__(self, key) -> bool:
        return key in (self.by_id if isinstance(key, int) else self.by_name)

    def __len__(self) -> int:
        return len(self.by_id)


def parse_dialect(text: str) -> Registry:
    """Parse dialect XML text into a Registry."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SchemaError(f"malformed dialect file: {exc}") from exc
    if root.tag != "dialect":
        raise SchemaError(f"expected <dialect> root, got <{root.tag}>")
    schemas = []
    for msg in root.findall("message"):
        name = msg.get("name")
        raw_id = msg.get("id")
        if name is None or raw_id is None:
            raise SchemaError("message element missing id or name")
        raw_fields = []
        for field in msg.findall("field"):
            if field.get("name") is None or field.get("type") is None:
                raise SchemaError(f"message {name}: field missing name or type")
            raw_fields.append((field.get("name"), field.get("type")))
        schemas.append(MessageSchema.build(int(raw_id), name, raw_fields))
    return Registry(schemas, dialect_name=root.get("name", ""))


def load_dialect(path=None) -> Registry:
    """Load a dialect file; defaults to the core dialect shipped in-package."""
    if path is None:
        text = resources.files("hexsim.data").joinpath("core_dialect.xml").read_text()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    return parse_dialect(text)
