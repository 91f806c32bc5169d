"""Runtime-bytecode utilities: compiler-metadata stripping.

Solidity appends a CBOR blob (source fingerprints, compiler version)
followed by a two-byte big-endian length to every runtime image.  The blob
is semantically irrelevant, so differential analysis strips it.  Stripping
repeats until no trailing blob parses, which makes the operation idempotent
for arbitrary inputs, not just well-formed compiler output.
"""

from __future__ import annotations


def _cbor_item_length(data: bytes, offset: int) -> int | None:
    """Length of the definite-length CBOR item at `offset`, or None."""
    if offset >= len(data):
        return None
    initial = data[offset]
    major = initial >> 5
    info = initial & 0x1F
    if info < 24:
        head, length = 1, info
    elif info == 24:
        if offset + 1 >= len(data):
            return None
        head, length = 2, data[offset + 1]
    elif info == 25:
        if offset + 2 >= len(data):
            return None
        head, length = 3, int.from_bytes(data[offset + 1:offset + 3], "big")
    else:
        return None  # longer forms / indefinite lengths never appear in metadata

    if major in (0, 1):  # unsigned / negative int: payload is in the head
        return head
    if major in (2, 3):  # byte / text string
        return head + length
    if major == 4:  # array
        total = head
        for _ in range(length):
            item = _cbor_item_length(data, offset + total)
            if item is None:
                return None
            total += item
        return total
    if major == 5:  # map
        total = head
        for _ in range(2 * length):
            item = _cbor_item_length(data, offset + total)
            if item is None:
                return None
            total += item
        return total
    if major == 7 and info < 24:  # simple values (false/true/null)
        return 1
    return None


def _is_metadata_blob(blob: bytes) -> bool:
    """True when `blob` parses as exactly one CBOR map."""
    if not blob or blob[0] >> 5 != 5:
        return False
    return _cbor_item_length(blob, 0) == len(blob)


def strip_metadata(runtime_bytecode: bytes) -> bytes:
    """Remove trailing compiler-metadata blob(s); non-conforming input
    passes through unchanged."""
    code = runtime_bytecode
    while len(code) >= 2:
        blob_len = int.from_bytes(code[-2:], "big")
        if blob_len == 0 or blob_len + 2 > len(code):
            break
        blob = code[-(blob_len + 2):-2]
        if not _is_metadata_blob(blob):
            break
        code = code[:-(blob_len + 2)]
    return code
