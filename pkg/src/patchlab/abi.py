"""Contract ABI encoding/decoding for the types exploit scenarios use.

Covers the standard head/tail layout for uintN/intN, address, bool,
bytesN, bytes, string, and (nested) fixed or dynamic arrays.  Tuples are
not needed by any scenario and are rejected explicitly.
"""

from __future__ import annotations

import re

from patchlab.chain.keccak import keccak256

_UINT = re.compile(r"^uint(\d+)?$")
_INT = re.compile(r"^int(\d+)?$")
_BYTES_N = re.compile(r"^bytes(\d+)$")
_FIXED_ARRAY = re.compile(r"^(.*)\[(\d+)\]$")


class AbiError(ValueError):
    pass


def function_selector(signature: str) -> bytes:
    """First four bytes of the keccak of a canonical signature."""
    return keccak256(signature.encode())[:4]


def signature_arg_types(signature: str) -> list[str]:
    match = re.match(r"^[A-Za-z_$][A-Za-z0-9_$]*\((.*)\)$", signature.strip())
    if not match:
        raise AbiError(f"not a canonical function signature: {signature!r}")
    inner = match.group(1)
    if not inner:
        return []
    types, depth, start = [], 0, 0
    for i, ch in enumerate(inner):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            types.append(inner[start:i])
            start = i + 1
    types.append(inner[start:])
    return [t.strip() for t in types]


def _normalize(type_name: str) -> str:
    if type_name == "uint":
        return "uint256"
    if type_name == "int":
        return "int256"
    return type_name


def is_dynamic(type_name: str) -> bool:
    type_name = _normalize(type_name)
    if type_name in ("bytes", "string"):
        return True
    if type_name.endswith("[]"):
        return True
    fixed = _FIXED_ARRAY.match(type_name)
    if fixed:
        return is_dynamic(fixed.group(1))
    return False


def _encode_static(type_name: str, value) -> bytes:
    type_name = _normalize(type_name)
    m = _UINT.match(type_name)
    if m:
        bits = int(m.group(1) or 256)
        value = int(value)
        if not 0 <= value < 2 ** bits:
            raise AbiError(f"{value} out of range for {type_name}")
        return value.to_bytes(32, "big")
    m = _INT.match(type_name)
    if m:
        bits = int(m.group(1) or 256)
        value = int(value)
        if not -(2 ** (bits - 1)) <= value < 2 ** (bits - 1):
            raise AbiError(f"{value} out of range for {type_name}")
        return (value % 2 ** 256).to_bytes(32, "big")
    if type_name == "address":
        if isinstance(value, str):
            value = bytes.fromhex(value[2:] if value.startswith("0x") else value)
        if len(value) != 20:
            raise AbiError(f"address must be 20 bytes, got {len(value)}")
        return value.rjust(32, b"\x00")
    if type_name == "bool":
        return int(bool(value)).to_bytes(32, "big")
    m = _BYTES_N.match(type_name)
    if m:
        n = int(m.group(1))
        if not 1 <= n <= 32:
            raise AbiError(f"invalid fixed bytes width {n}")
        if isinstance(value, str):
            value = bytes.fromhex(value[2:] if value.startswith("0x") else value)
        if isinstance(value, int):
            value = value.to_bytes(n, "big")
        if len(value) != n:
            raise AbiError(f"{type_name} needs exactly {n} bytes")
        return value.ljust(32, b"\x00")
    raise AbiError(f"unsupported ABI type {type_name!r}")


def _encode_dynamic_payload(type_name: str, value) -> bytes:
    type_name = _normalize(type_name)
    if type_name in ("bytes", "string"):
        if type_name == "string":
            data = value.encode() if isinstance(value, str) else bytes(value)
        else:
            if isinstance(value, str):
                data = bytes.fromhex(value[2:] if value.startswith("0x") else value)
            else:
                data = bytes(value)
        padded_len = (len(data) + 31) // 32 * 32
        return len(data).to_bytes(32, "big") + data.ljust(padded_len, b"\x00")
    if type_name.endswith("[]"):
        element = type_name[:-2]
        return len(value).to_bytes(32, "big") + encode_sequence([element] * len(value), list(value))
    fixed = _FIXED_ARRAY.match(type_name)
    if fixed:
        element, count = fixed.group(1), int(fixed.group(2))
        if len(value) != count:
            raise AbiError(f"{type_name} needs exactly {count} elements")
        return encode_sequence([element] * count, list(value))
    raise AbiError(f"type {type_name!r} is not dynamic")


def encode_sequence(types: list[str], values: list) -> bytes:
    if len(types) != len(values):
        raise AbiError(f"expected {len(types)} values, got {len(values)}")
    heads: list[bytes] = []
    tails: list[bytes] = []
    head_size = 0
    for t in types:
        head_size += 32  # every head slot is one word here (no static tuples)
    offset = head_size
    for t, v in zip(types, values):
        if is_dynamic(t):
            heads.append(offset.to_bytes(32, "big"))
            payload = _encode_dynamic_payload(t, v)
            tails.append(payload)
            offset += len(payload)
        else:
            fixed = _FIXED_ARRAY.match(_normalize(t))
            if fixed:  # static fixed array occupies several words: not single-slot
                raise AbiError("static fixed-size arrays are not supported in sequences")
            heads.append(_encode_static(t, v))
    return b"".join(heads) + b"".join(tails)


def encode_call(signature: str, values: list) -> bytes:
    """Selector plus encoded arguments for a canonical signature."""
    return function_selector(signature) + encode_sequence(signature_arg_types(signature), values)


def decode_sequence(types: list[str], data: bytes) -> list:
    out = []
    for index, t in enumerate(types):
        head = data[index * 32:(index + 1) * 32]
        if len(head) != 32:
            raise AbiError("truncated ABI data")
        if is_dynamic(t):
            offset = int.from_bytes(head, "big")
            out.append(_decode_dynamic(t, data, offset))
        else:
            out.append(_decode_static(t, head))
    return out


def _decode_static(type_name: str, word: bytes):
    type_name = _normalize(type_name)
    if _UINT.match(type_name):
        return int.from_bytes(word, "big")
    m = _INT.match(type_name)
    if m:
        value = int.from_bytes(word, "big")
        return value - 2 ** 256 if value >= 2 ** 255 else value
    if type_name == "address":
        return word[12:]
    if type_name == "bool":
        return bool(int.from_bytes(word, "big"))
    m = _BYTES_N.match(type_name)
    if m:
        return word[:int(m.group(1))]
    raise AbiError(f"unsupported ABI type {type_name!r}")


def _decode_dynamic(type_name: str, data: bytes, offset: int):
    type_name = _normalize(type_name)
    if type_name in ("bytes", "string"):
        length = int.from_bytes(data[offset:offset + 32], "big")
        payload = data[offset + 32:offset + 32 + length]
        return payload.decode() if type_name == "string" else payload
    if type_name.endswith("[]"):
        element = type_name[:-2]
        length = int.from_bytes(data[offset:offset + 32], "big")
        return decode_sequence([element] * length, data[offset + 32:])
    fixed = _FIXED_ARRAY.match(type_name)
    if fixed:
        element, count = fixed.group(1), int(fixed.group(2))
        return decode_sequence([element] * count, data[offset:])
    raise AbiError(f"type {type_name!r} is not dynamic")
