"""CRC-16/MCRF4XX: polynomial 0x1021 reflected, init 0xFFFF, no final xor."""


def crc16(data: bytes, crc: int = 0xFFFF) -> int:
    """Accumulate data into a running CRC (byte-wise reflected form)."""
    for byte in data:
        tmp = byte ^ (crc & 0xFF)
        tmp = (tmp ^ (tmp << 4)) & 0xFF
        crc = ((crc >> 8) ^ (tmp << 8) ^ (tmp << 3) ^ (tmp >> 4)) & 0xFFFF
    return crc


def crc_extra_for(name: str, fields) -> int:
    """Schema fingerprint byte folded into every frame checksum.

    Checksums the space-joined token list "NAME TYPE1 FIELD1 TYPE2 FIELD2..."
    (declared order, array suffixes included) and folds the 16-bit result to
    (hi XOR lo). A dialect mismatch between peers then fails frame CRCs.
    """
    tokens = [name]
    for field_name, type_name in fields:
        tokens.append(type_name)
        tokens.append(field_name)
    value = crc16(" ".join(tokens).encode("ascii"))
    return ((value >> 8) ^ value) & 0xFF
