"""Canonical length-prefixed binary encoding.

Every value on the wire is a one-byte tag followed by its payload:

    0x00  None
    0x01  False
    0x02  True
    0x03  unsigned int, 8 bytes little-endian
    0x04  big unsigned int, u32 byte count + little-endian magnitude
    0x05  bytes, u32 length + raw bytes
    0x06  str, u32 length + utf-8 bytes
    0x07  sequence, u32 item count + items

Objects that define ``to_wire()`` are encoded as whatever that returns.
``size_of`` mirrors ``encode`` without allocating, so byte accounting stays
bit-exact with the real encoding.
"""

from __future__ import annotations

import struct

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_MAX_U64 = (1 << 64) - 1


class EncodingError(ValueError):
    pass


def encode(value) -> bytes:
    out = bytearray()
    _encode_into(value, out)
    return bytes(out)


def _encode_into(value, out: bytearray) -> None:
    if value is None:
        out.append(0)
    elif value is True:
        out.append(2)
    elif value is False:
        out.append(1)
    elif isinstance(value, int):
        if value < 0:
            raise EncodingError("negative integers have no canonical encoding")
        if value <= _MAX_U64:
            out.append(3)
            out += _U64.pack(value)
        else:
            raw = value.to_bytes((value.bit_length() + 7) // 8, "little")
            out.append(4)
            out += _U32.pack(len(raw))
            out += raw
    elif isinstance(value, (bytes, bytearray, memoryview)):
        out.append(5)
        out += _U32.pack(len(value))
        out += value
    elif isinstance(value, str):
        raw = value.encode()
        out.append(6)
        out += _U32.pack(len(raw))
        out += raw
    elif isinstance(value, (tuple, list)):
        out.append(7)
        out += _U32.pack(len(value))
        for item in value:
            _encode_into(item, out)
    elif hasattr(value, "to_wire"):
        _encode_into(value.to_wire(), out)
    else:
        raise EncodingError(f"cannot encode {type(value).__name__}")


def size_of(value) -> int:
    if value is None or value is True or value is False:
        return 1
    t = type(value)
    if t is int:
        if value <= _MAX_U64:
            return 9
        return 5 + (value.bit_length() + 7) // 8
    if t is bytes:
        return 5 + len(value)
    if t is tuple or t is list:
        total = 5
        for item in value:
            total += size_of(item)
        return total
    if t is str:
        return 5 + len(value.encode())
    cached = getattr(value, "wire_size", None)
    if cached is not None:
        return cached
    if hasattr(value, "to_wire"):
        return size_of(value.to_wire())
    if isinstance(value, (bytearray, memoryview)):
        return 5 + len(value)
    if isinstance(value, int):
        return size_of(int(value))
    raise EncodingError(f"cannot size {t.__name__}")


def decode(data: bytes):
    value, pos = _decode_at(memoryview(data), 0)
    if pos != len(data):
        raise EncodingError("trailing bytes after value")
    return value


def _decode_at(buf: memoryview, pos: int):
    try:
        tag = buf[pos]
    except IndexError:
        raise EncodingError("truncated input") from None
    pos += 1
    if tag == 0:
        return None, pos
    if tag == 1:
        return False, pos
    if tag == 2:
        return True, pos
    if tag == 3:
        _need(buf, pos, 8)
        return _U64.unpack_from(buf, pos)[0], pos + 8
    if tag in (4, 5, 6):
        _need(buf, pos, 4)
        length = _U32.unpack_from(buf, pos)[0]
        pos += 4
        _need(buf, pos, length)
        raw = bytes(buf[pos:pos + length])
        pos += length
        if tag == 4:
            return int.from_bytes(raw, "little"), pos
        if tag == 5:
            return raw, pos
        return raw.decode(), pos
    if tag == 7:
        _need(buf, pos, 4)
        count = _U32.unpack_from(buf, pos)[0]
        pos += 4
        items = []
        for _ in range(count):
            item, pos = _decode_at(buf, pos)
            items.append(item)
        return tuple(items), pos
    raise EncodingError(f"unknown tag {tag:#x}")


def _need(buf: memoryview, pos: int, count: int) -> None:
    if pos + count > len(buf):
        raise EncodingError("truncated input")
