"""Keccak-256 (the pre-NIST padding variant used by the EVM).

hashlib's sha3_256 is the standardized SHA-3 with 0x06 domain padding and
produces different digests, so the original Keccak permutation is
implemented here.  Inputs at contract scale are tiny (selectors, storage
slots, addresses); pure Python is plenty fast.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1

_ROUND_CONSTANTS = (
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
)

# Rotation offsets indexed [x][y] with lane A[x, y] stored flat at x + 5*y.
_ROTATIONS = (
    (0, 36, 3, 41, 18),
    (1, 44, 10, 45, 2),
    (62, 6, 43, 15, 61),
    (28, 55, 25, 21, 56),
    (27, 20, 39, 8, 14),
)

_RATE = 136  # bytes; 1600 - 2*256 bits


def _rotl(value: int, shift: int) -> int:
    return ((value << shift) | (value >> (64 - shift))) & _MASK


def _keccak_f(state: list[int]) -> None:
    for rc in _ROUND_CONSTANTS:
        # theta
        c = [state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^ state[x + 20]
             for x in range(5)]
        d = [c[(x - 1) % 5] ^ _rotl(c[(x + 1) % 5], 1) for x in range(5)]
        for i in range(25):
            state[i] ^= d[i % 5]
        # rho + pi
        b = [0] * 25
        for x in range(5):
            for y in range(5):
                b[y + 5 * ((2 * x + 3 * y) % 5)] = _rotl(state[x + 5 * y], _ROTATIONS[x][y])
        # chi
        for x in range(5):
            for y in range(5):
                state[x + 5 * y] = b[x + 5 * y] ^ ((~b[(x + 1) % 5 + 5 * y]) & b[(x + 2) % 5 + 5 * y] & _MASK)
        # iota
        state[0] ^= rc


def keccak256(data: bytes) -> bytes:
    """Digest of `data` under Keccak-256 (0x01 multi-rate padding)."""
    state = [0] * 25
    # absorb
    padded_len = (len(data) // _RATE + 1) * _RATE
    padded = bytearray(data)
    padded.append(0x01)
    padded.extend(b"\x00" * (padded_len - len(padded)))
    padded[-1] |= 0x80
    for block_start in range(0, padded_len, _RATE):
        block = padded[block_start:block_start + _RATE]
        for lane in range(_RATE // 8):
            state[lane] ^= int.from_bytes(block[lane * 8:lane * 8 + 8], "little")
        _keccak_f(state)
    # squeeze (32 bytes < rate, single block)
    out = bytearray()
    for lane in range(4):
        out += state[lane].to_bytes(8, "little")
    return bytes(out)
