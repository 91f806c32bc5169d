"""Embedded EVM: message-call interpreter and transaction application.

Implements mainline state-transition semantics for the fork profiles in
`forks.py`: EIP-150 gas forwarding (63/64), EIP-161 dead-account rules,
Byzantium REVERT/RETURNDATA, Constantinople shifts/CREATE2/EXTCODEHASH,
Istanbul repricings and EIP-2200 net SSTORE metering, and the
Berlin/London/Shanghai warm-cold + reduced-refund rules.  Consensus-grade
trie hashing, receipts and signature handling are out of scope: this engine
exists to execute exploit scenarios deterministically.
"""

from __future__ import annotations

import hashlib
import sys
import time
from dataclasses import dataclass, field

from patchlab.chain import rlp
from patchlab.chain.base import BlockContext, TxResult, TxStatus
from patchlab.chain.forks import Fork, GasSchedule, SstoreMode
from patchlab.chain.keccak import keccak256
from patchlab.chain.state import State

# Deep EVM call chains nest several Python frames per level; the default
# recursion limit would fail well before the EVM's own 1024-depth limit.
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

CALL_DEPTH_LIMIT = 1024
STACK_LIMIT = 1024
UINT256 = 2 ** 256
UINT255 = 2 ** 255

PRECOMPILES = {bytes(19) + bytes([i]) for i in range(1, 10)}


class VMError(Exception):
    """Exceptional frame halt: burns all gas in the frame."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class DeadlineExceeded(Exception):
    """Wall-clock budget exhausted; propagates out of the transaction."""


class _Stop(Exception):
    pass


class _Revert(Exception):
    def __init__(self, data: bytes):
        self.data = data
        super().__init__("revert")


class _SelfDestruct(Exception):
    pass


@dataclass
class Substate:
    """Per-transaction accrued effects; reverted along with the state."""

    refund: int = 0
    logs: list = field(default_factory=list)
    selfdestructs: set = field(default_factory=set)
    accessed_addrs: set = field(default_factory=set)
    accessed_slots: set = field(default_factory=set)

    def snapshot(self):
        return (self.refund, len(self.logs), set(self.selfdestructs),
                set(self.accessed_addrs), set(self.accessed_slots))

    def restore(self, snap):
        self.refund, log_len, self.selfdestructs, self.accessed_addrs, self.accessed_slots = (
            snap[0], snap[1], snap[2], snap[3], snap[4])
        del self.logs[log_len:]


@dataclass
class TxEnv:
    state: State
    block: BlockContext
    schedule: GasSchedule
    fork: Fork
    origin: bytes
    gas_price: int
    chain_id: int
    substate: Substate
    blockhash_fn: callable
    deadline: float | None = None
    original_storage: dict = field(default_factory=dict)  # (addr, slot) -> pre-tx value


@dataclass
class Message:
    sender: bytes
    to: bytes            # storage/balance context of the frame
    code_address: bytes  # whose code runs (differs under DELEGATECALL/CALLCODE)
    value: int           # apparent value (msg.value)
    transfer: bool       # whether value actually moves
    data: bytes
    gas: int
    depth: int
    is_static: bool
    is_create: bool = False
    code: bytes = b""


@dataclass
class FrameResult:
    success: bool
    output: bytes
    gas_left: int
    reverted: bool = False
    halt_reason: str = ""


def _analyze_jumpdests(code: bytes) -> frozenset:
    dests = set()
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        if op == 0x5B:
            dests.add(i)
        if 0x60 <= op <= 0x7F:
            i += op - 0x5F
        i += 1
    return frozenset(dests)


_JUMPDEST_CACHE: dict[bytes, frozenset] = {}


def _jumpdests(code: bytes) -> frozenset:
    cached = _JUMPDEST_CACHE.get(code)
    if cached is None:
        cached = _analyze_jumpdests(code)
        if len(_JUMPDEST_CACHE) > 1024:
            _JUMPDEST_CACHE.clear()
        _JUMPDEST_CACHE[code] = cached
    return cached


class Frame:
    __slots__ = ("env", "msg", "stack", "mem", "pc", "gas", "returndata",
                 "output", "code", "jumpdests", "steps")

    def __init__(self, env: TxEnv, msg: Message):
        self.env = env
        self.msg = msg
        self.stack: list[int] = []
        self.mem = bytearray()
        self.pc = 0
        self.gas = msg.gas
        self.returndata = b""
        self.output = b""
        self.code = msg.code
        self.jumpdests = _jumpdests(msg.code)
        self.steps = 0

    # stack and gas primitives

    def push(self, value: int) -> None:
        if len(self.stack) >= STACK_LIMIT:
            raise VMError("stack overflow")
        self.stack.append(value)

    def pop(self) -> int:
        if not self.stack:
            raise VMError("stack underflow")
        return self.stack.pop()

    def charge(self, amount: int) -> None:
        if amount > self.gas:
            self.gas = 0
            raise VMError("out of gas")
        self.gas -= amount

    # memory

    def _expand(self, offset: int, size: int) -> None:
        if size == 0:
            return
        end = offset + size
        new_words = (end + 31) // 32
        old_words = len(self.mem) // 32
        if new_words > old_words:
            sched = self.env.schedule
            cost = (sched.memory_word * new_words + new_words * new_words // sched.quad_divisor) - \
                   (sched.memory_word * old_words + old_words * old_words // sched.quad_divisor)
            self.charge(cost)
            self.mem.extend(b"\x00" * (new_words * 32 - len(self.mem)))

    def mread(self, offset: int, size: int) -> bytes:
        self._expand(offset, size)
        return bytes(self.mem[offset:offset + size])

    def mwrite(self, offset: int, data: bytes) -> None:
        self._expand(offset, len(data))
        self.mem[offset:offset + len(data)] = data

    # warm/cold accounting

    def charge_account_access(self, address: bytes, flat: int) -> None:
        sched = self.env.schedule
        if sched.warm_cold:
            if address in self.env.substate.accessed_addrs:
                self.charge(sched.warm_access)
            else:
                self.env.substate.accessed_addrs.add(address)
                self.charge(sched.cold_account_access)
        else:
            self.charge(flat)


def _as_address(value: int) -> bytes:
    return (value % (1 << 160)).to_bytes(20, "big")


def _signed(value: int) -> int:
    return value - UINT256 if value >= UINT255 else value


def _copy_cost(frame: Frame, size: int) -> int:
    return frame.env.schedule.copy_word * ((size + 31) // 32)


# ---------------------------------------------------------------------------
# opcode handlers
# ---------------------------------------------------------------------------

def _op_stop(f: Frame):
    raise _Stop


def _op_add(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push((f.pop() + f.pop()) % UINT256)


def _op_mul(f: Frame):
    f.charge(f.env.schedule.low)
    f.push((f.pop() * f.pop()) % UINT256)


def _op_sub(f: Frame):
    f.charge(f.env.schedule.verylow)
    a, b = f.pop(), f.pop()
    f.push((a - b) % UINT256)


def _op_div(f: Frame):
    f.charge(f.env.schedule.low)
    a, b = f.pop(), f.pop()
    f.push(0 if b == 0 else a // b)


def _op_sdiv(f: Frame):
    f.charge(f.env.schedule.low)
    a, b = _signed(f.pop()), _signed(f.pop())
    if b == 0:
        f.push(0)
    else:
        q = abs(a) // abs(b)
        f.push((q if (a < 0) == (b < 0) else -q) % UINT256)


def _op_mod(f: Frame):
    f.charge(f.env.schedule.low)
    a, b = f.pop(), f.pop()
    f.push(0 if b == 0 else a % b)


def _op_smod(f: Frame):
    f.charge(f.env.schedule.low)
    a, b = _signed(f.pop()), _signed(f.pop())
    if b == 0:
        f.push(0)
    else:
        r = abs(a) % abs(b)
        f.push((-r if a < 0 else r) % UINT256)


def _op_addmod(f: Frame):
    f.charge(f.env.schedule.mid)
    a, b, m = f.pop(), f.pop(), f.pop()
    f.push(0 if m == 0 else (a + b) % m)


def _op_mulmod(f: Frame):
    f.charge(f.env.schedule.mid)
    a, b, m = f.pop(), f.pop(), f.pop()
    f.push(0 if m == 0 else (a * b) % m)


def _op_exp(f: Frame):
    base, exponent = f.pop(), f.pop()
    byte_len = (exponent.bit_length() + 7) // 8
    f.charge(f.env.schedule.exp + f.env.schedule.exp_byte * byte_len)
    f.push(pow(base, exponent, UINT256))


def _op_signextend(f: Frame):
    f.charge(f.env.schedule.low)
    k, value = f.pop(), f.pop()
    if k < 31:
        bit = 8 * (k + 1) - 1
        if value & (1 << bit):
            value |= UINT256 - (1 << (bit + 1))
        else:
            value &= (1 << (bit + 1)) - 1
    f.push(value % UINT256)


def _op_lt(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(1 if f.pop() < f.pop() else 0)


def _op_gt(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(1 if f.pop() > f.pop() else 0)


def _op_slt(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(1 if _signed(f.pop()) < _signed(f.pop()) else 0)


def _op_sgt(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(1 if _signed(f.pop()) > _signed(f.pop()) else 0)


def _op_eq(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(1 if f.pop() == f.pop() else 0)


def _op_iszero(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(1 if f.pop() == 0 else 0)


def _op_and(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(f.pop() & f.pop())


def _op_or(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(f.pop() | f.pop())


def _op_xor(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(f.pop() ^ f.pop())


def _op_not(f: Frame):
    f.charge(f.env.schedule.verylow)
    f.push(f.pop() ^ (UINT256 - 1))


def _op_byte(f: Frame):
    f.charge(f.env.schedule.verylow)
    i, x = f.pop(), f.pop()
    f.push((x >> (8 * (31 - i))) & 0xFF if i < 32 else 0)


def _op_shl(f: Frame):
    if not f.env.schedule.has_shifts:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.verylow)
    shift, value = f.pop(), f.pop()
    f.push((value << shift) % UINT256 if shift < 256 else 0)


def _op_shr(f: Frame):
    if not f.env.schedule.has_shifts:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.verylow)
    shift, value = f.pop(), f.pop()
    f.push(value >> shift if shift < 256 else 0)


def _op_sar(f: Frame):
    if not f.env.schedule.has_shifts:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.verylow)
    shift, value = f.pop(), _signed(f.pop())
    if shift >= 256:
        f.push(0 if value >= 0 else UINT256 - 1)
    else:
        f.push((value >> shift) % UINT256)


def _op_keccak256(f: Frame):
    offset, size = f.pop(), f.pop()
    f.charge(f.env.schedule.keccak + f.env.schedule.keccak_word * ((size + 31) // 32))
    data = f.mread(offset, size)
    f.push(int.from_bytes(keccak256(data), "big"))


def _op_address(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(int.from_bytes(f.msg.to, "big"))


def _op_balance(f: Frame):
    addr = _as_address(f.pop())
    f.charge_account_access(addr, f.env.schedule.balance)
    f.push(f.env.state.balance(addr))


def _op_origin(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(int.from_bytes(f.env.origin, "big"))


def _op_caller(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(int.from_bytes(f.msg.sender, "big"))


def _op_callvalue(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(f.msg.value)


def _op_calldataload(f: Frame):
    f.charge(f.env.schedule.verylow)
    offset = f.pop()
    chunk = f.msg.data[offset:offset + 32]
    f.push(int.from_bytes(chunk.ljust(32, b"\x00"), "big"))


def _op_calldatasize(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(len(f.msg.data))


def _op_calldatacopy(f: Frame):
    dst, src, size = f.pop(), f.pop(), f.pop()
    f.charge(f.env.schedule.verylow + _copy_cost(f, size))
    data = f.msg.data[src:src + size].ljust(size, b"\x00") if size else b""
    f.mwrite(dst, data)


def _op_codesize(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(len(f.code))


def _op_codecopy(f: Frame):
    dst, src, size = f.pop(), f.pop(), f.pop()
    f.charge(f.env.schedule.verylow + _copy_cost(f, size))
    data = f.code[src:src + size].ljust(size, b"\x00") if size else b""
    f.mwrite(dst, data)


def _op_gasprice(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(f.env.gas_price)


def _op_extcodesize(f: Frame):
    addr = _as_address(f.pop())
    f.charge_account_access(addr, f.env.schedule.extcodesize)
    f.push(len(f.env.state.code(addr)))


def _op_extcodecopy(f: Frame):
    addr = _as_address(f.pop())
    dst, src, size = f.pop(), f.pop(), f.pop()
    f.charge_account_access(addr, f.env.schedule.extcodecopy)
    f.charge(_copy_cost(f, size))
    code = f.env.state.code(addr)
    data = code[src:src + size].ljust(size, b"\x00") if size else b""
    f.mwrite(dst, data)


def _op_returndatasize(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(len(f.returndata))


def _op_returndatacopy(f: Frame):
    dst, src, size = f.pop(), f.pop(), f.pop()
    f.charge(f.env.schedule.verylow + _copy_cost(f, size))
    if src + size > len(f.returndata):
        raise VMError("returndata out of bounds")
    f.mwrite(dst, f.returndata[src:src + size])


def _op_extcodehash(f: Frame):
    if not f.env.schedule.has_extcodehash:
        raise VMError("invalid opcode")
    addr = _as_address(f.pop())
    f.charge_account_access(addr, f.env.schedule.extcodehash)
    if f.env.state.is_dead(addr):
        f.push(0)
    else:
        f.push(int.from_bytes(keccak256(f.env.state.code(addr)), "big"))


def _op_blockhash(f: Frame):
    f.charge(f.env.schedule.blockhash)
    number = f.pop()
    f.push(int.from_bytes(f.env.blockhash_fn(number), "big"))


def _op_coinbase(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(int.from_bytes(f.env.block.coinbase, "big"))


def _op_timestamp(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(f.env.block.timestamp)


def _op_number(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(f.env.block.block_number)


def _op_prevrandao(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(int.from_bytes(f.env.block.prevrandao_or_difficulty, "big"))


def _op_gaslimit(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(8_000_000)  # embedded chain's block gas limit


def _op_chainid(f: Frame):
    if not f.env.schedule.has_chainid:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.base)
    f.push(f.env.chain_id)


def _op_selfbalance(f: Frame):
    if not f.env.schedule.has_selfbalance:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.low)
    f.push(f.env.state.balance(f.msg.to))


def _op_basefee(f: Frame):
    if not f.env.schedule.has_basefee:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.base)
    f.push(0)


def _op_pop(f: Frame):
    f.charge(f.env.schedule.base)
    f.pop()


def _op_mload(f: Frame):
    f.charge(f.env.schedule.verylow)
    offset = f.pop()
    f.push(int.from_bytes(f.mread(offset, 32), "big"))


def _op_mstore(f: Frame):
    f.charge(f.env.schedule.verylow)
    offset, value = f.pop(), f.pop()
    f.mwrite(offset, value.to_bytes(32, "big"))


def _op_mstore8(f: Frame):
    f.charge(f.env.schedule.verylow)
    offset, value = f.pop(), f.pop()
    f.mwrite(offset, bytes([value & 0xFF]))


def _op_sload(f: Frame):
    sched = f.env.schedule
    slot = f.pop()
    key = (f.msg.to, slot)
    if sched.warm_cold:
        if key in f.env.substate.accessed_slots:
            f.charge(sched.warm_access)
        else:
            f.env.substate.accessed_slots.add(key)
            f.charge(sched.cold_sload)
    else:
        f.charge(sched.sload)
    f.push(f.env.state.storage(f.msg.to, slot))


def _op_sstore(f: Frame):
    if f.msg.is_static:
        raise VMError("state modification in static context")
    sched = f.env.schedule
    env = f.env
    slot = f.pop()
    new = f.pop()
    addr = f.msg.to

    if sched.sstore_mode is not SstoreMode.LEGACY and f.gas <= sched.sstore_sentry:
        raise VMError("out of gas")  # EIP-2200 sentry

    current = env.state.storage(addr, slot)
    key = (addr, slot)
    if key not in env.original_storage:
        env.original_storage[key] = current
    original = env.original_storage[key]

    if sched.sstore_mode is SstoreMode.NET_WARM_COLD:
        if key in env.substate.accessed_slots:
            cold_extra = 0
        else:
            env.substate.accessed_slots.add(key)
            cold_extra = sched.cold_sload
    else:
        cold_extra = 0

    if sched.sstore_mode is SstoreMode.LEGACY:
        if current == 0 and new != 0:
            f.charge(sched.sstore_set)
        else:
            f.charge(sched.sstore_reset)
            if current != 0 and new == 0:
                env.substate.refund += sched.sstore_clear_refund
    else:
        noop = sched.sstore_noop
        if new == current:
            f.charge(noop + cold_extra)
        elif current == original:
            if original == 0:
                f.charge(sched.sstore_set + cold_extra)
            else:
                f.charge(sched.sstore_reset + cold_extra)
                if new == 0:
                    env.substate.refund += sched.sstore_clear_refund
        else:
            f.charge(noop + cold_extra)
            if original != 0:
                if current == 0:
                    env.substate.refund -= sched.sstore_clear_refund
                if new == 0:
                    env.substate.refund += sched.sstore_clear_refund
            if new == original:
                if original == 0:
                    env.substate.refund += sched.sstore_set - noop
                else:
                    env.substate.refund += sched.sstore_reset - noop

    env.state.set_storage(addr, slot, new)


def _op_jump(f: Frame):
    f.charge(f.env.schedule.mid)
    dest = f.pop()
    if dest not in f.jumpdests:
        raise VMError("bad jump destination")
    f.pc = dest


def _op_jumpi(f: Frame):
    f.charge(f.env.schedule.high)
    dest, cond = f.pop(), f.pop()
    if cond != 0:
        if dest not in f.jumpdests:
            raise VMError("bad jump destination")
        f.pc = dest


def _op_pc(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(f.pc - 1)


def _op_msize(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(len(f.mem))


def _op_gas(f: Frame):
    f.charge(f.env.schedule.base)
    f.push(f.gas)


def _op_jumpdest(f: Frame):
    f.charge(f.env.schedule.jumpdest)


def _op_push0(f: Frame):
    if not f.env.schedule.has_push0:
        raise VMError("invalid opcode")
    f.charge(f.env.schedule.base)
    f.push(0)


def _make_push(n: int):
    def _op_push(f: Frame):
        f.charge(f.env.schedule.verylow)
        data = f.code[f.pc:f.pc + n]
        f.pc += n
        f.push(int.from_bytes(data.ljust(n, b"\x00"), "big"))
    return _op_push


def _make_dup(n: int):
    def _op_dup(f: Frame):
        f.charge(f.env.schedule.verylow)
        if len(f.stack) < n:
            raise VMError("stack underflow")
        f.push(f.stack[-n])
    return _op_dup


def _make_swap(n: int):
    def _op_swap(f: Frame):
        f.charge(f.env.schedule.verylow)
        if len(f.stack) < n + 1:
            raise VMError("stack underflow")
        f.stack[-1], f.stack[-n - 1] = f.stack[-n - 1], f.stack[-1]
    return _op_swap


def _make_log(topics: int):
    def _op_log(f: Frame):
        if f.msg.is_static:
            raise VMError("state modification in static context")
        offset, size = f.pop(), f.pop()
        topic_values = [f.pop() for _ in range(topics)]
        sched = f.env.schedule
        f.charge(sched.log + sched.log_topic * topics + sched.log_data_byte * size)
        data = f.mread(offset, size)
        f.env.substate.logs.append(
            (f.msg.to, tuple(t.to_bytes(32, "big") for t in topic_values), data))
    return _op_log


def _op_return(f: Frame):
    offset, size = f.pop(), f.pop()
    f.output = f.mread(offset, size)
    raise _Stop


def _op_revert(f: Frame):
    offset, size = f.pop(), f.pop()
    raise _Revert(f.mread(offset, size))


def _op_invalid(f: Frame):
    raise VMError("invalid opcode")


def _op_selfdestruct(f: Frame):
    if f.msg.is_static:
        raise VMError("state modification in static context")
    beneficiary = _as_address(f.pop())
    sched = f.env.schedule
    state = f.env.state
    extra = 0
    if sched.warm_cold and beneficiary not in f.env.substate.accessed_addrs:
        f.env.substate.accessed_addrs.add(beneficiary)
        extra += sched.cold_account_access
    if state.is_dead(beneficiary) and state.balance(f.msg.to) > 0:
        extra += sched.new_account
    f.charge(sched.selfdestruct + extra)
    if f.msg.to not in f.env.substate.selfdestructs:
        f.env.substate.refund += sched.selfdestruct_refund
        f.env.substate.selfdestructs.add(f.msg.to)
    amount = state.balance(f.msg.to)
    state.sub_balance(f.msg.to, amount)
    state.add_balance(beneficiary, amount)
    raise _Stop


# call family ---------------------------------------------------------------

def _consume_call_gas(f: Frame, requested: int) -> int:
    """EIP-150: forward at most all-but-one-64th of what remains."""
    cap = f.gas - f.gas // 64
    child_gas = min(requested, cap)
    f.charge(child_gas)
    return child_gas


def _do_call(f: Frame, kind: str):
    sched = f.env.schedule
    requested = f.pop()
    to = _as_address(f.pop())
    if kind in ("call", "callcode"):
        value = f.pop()
    else:
        value = 0
    in_off, in_size, out_off, out_size = f.pop(), f.pop(), f.pop(), f.pop()

    if kind == "call" and value > 0 and f.msg.is_static:
        raise VMError("state modification in static context")

    data = f.mread(in_off, in_size)
    f._expand(out_off, out_size)

    f.charge_account_access(to, sched.call)
    extra = 0
    if value > 0:
        extra += sched.call_value
        if kind == "call" and f.env.state.is_dead(to):
            extra += sched.new_account
    f.charge(extra)

    child_gas = _consume_call_gas(f, requested)
    stipend = sched.call_stipend if value > 0 else 0

    if f.msg.depth + 1 > CALL_DEPTH_LIMIT or \
            (value > 0 and f.env.state.balance(f.msg.to) < value):
        f.gas += child_gas  # child never ran; hand its gas back
        f.returndata = b""
        f.push(0)
        return

    if kind == "call":
        child = Message(sender=f.msg.to, to=to, code_address=to, value=value,
                        transfer=True, data=data, gas=child_gas + stipend,
                        depth=f.msg.depth + 1, is_static=f.msg.is_static,
                        code=f.env.state.code(to))
    elif kind == "callcode":
        child = Message(sender=f.msg.to, to=f.msg.to, code_address=to, value=value,
                        transfer=False, data=data, gas=child_gas + stipend,
                        depth=f.msg.depth + 1, is_static=f.msg.is_static,
                        code=f.env.state.code(to))
    elif kind == "delegatecall":
        child = Message(sender=f.msg.sender, to=f.msg.to, code_address=to,
                        value=f.msg.value, transfer=False, data=data, gas=child_gas,
                        depth=f.msg.depth + 1, is_static=f.msg.is_static,
                        code=f.env.state.code(to))
    else:  # staticcall
        child = Message(sender=f.msg.to, to=to, code_address=to, value=0,
                        transfer=False, data=data, gas=child_gas,
                        depth=f.msg.depth + 1, is_static=True,
                        code=f.env.state.code(to))

    result = execute_message(f.env, child)
    f.gas += result.gas_left
    f.returndata = result.output
    if out_size:
        f.mem[out_off:out_off + min(out_size, len(result.output))] = \
            result.output[:min(out_size, len(result.output))]
    f.push(1 if result.success else 0)


def _op_call(f: Frame):
    _do_call(f, "call")


def _op_callcode(f: Frame):
    _do_call(f, "callcode")


def _op_delegatecall(f: Frame):
    _do_call(f, "delegatecall")


def _op_staticcall(f: Frame):
    _do_call(f, "staticcall")


def _do_create(f: Frame, is_create2: bool):
    sched = f.env.schedule
    if f.msg.is_static:
        raise VMError("state modification in static context")
    value = f.pop()
    offset, size = f.pop(), f.pop()
    salt = f.pop() if is_create2 else None

    cost = sched.create
    if is_create2:
        cost += sched.keccak_word * ((size + 31) // 32)
    if sched.initcode_metering:
        if size > sched.max_initcode_size:
            raise VMError("initcode too large")
        cost += 2 * ((size + 31) // 32)
    f.charge(cost)
    initcode = f.mread(offset, size)

    creator = f.msg.to
    if value > 0 and f.env.state.balance(creator) < value:
        f.returndata = b""
        f.push(0)
        return

    child_gas = f.gas - f.gas // 64
    f.charge(child_gas)

    if f.msg.depth + 1 > CALL_DEPTH_LIMIT:
        f.gas += child_gas
        f.returndata = b""
        f.push(0)
        return

    nonce = f.env.state.account(creator).nonce
    f.env.state.account(creator).nonce = nonce + 1
    if is_create2:
        new_address = keccak256(
            b"\xff" + creator + salt.to_bytes(32, "big") + keccak256(initcode))[12:]
    else:
        new_address = keccak256(rlp.encode([creator, nonce]))[12:]

    child = Message(sender=creator, to=new_address, code_address=new_address,
                    value=value, transfer=True, data=b"", gas=child_gas,
                    depth=f.msg.depth + 1, is_static=False, is_create=True,
                    code=initcode)
    result = execute_message(f.env, child)
    f.gas += result.gas_left
    f.returndata = result.output if result.reverted else b""
    f.push(int.from_bytes(new_address, "big") if result.success else 0)


def _op_create(f: Frame):
    _do_create(f, False)


def _op_create2(f: Frame):
    if not f.env.schedule.has_create2:
        raise VMError("invalid opcode")
    _do_create(f, True)


OPCODES: dict[int, callable] = {
    0x00: _op_stop, 0x01: _op_add, 0x02: _op_mul, 0x03: _op_sub, 0x04: _op_div,
    0x05: _op_sdiv, 0x06: _op_mod, 0x07: _op_smod, 0x08: _op_addmod,
    0x09: _op_mulmod, 0x0A: _op_exp, 0x0B: _op_signextend,
    0x10: _op_lt, 0x11: _op_gt, 0x12: _op_slt, 0x13: _op_sgt, 0x14: _op_eq,
    0x15: _op_iszero, 0x16: _op_and, 0x17: _op_or, 0x18: _op_xor, 0x19: _op_not,
    0x1A: _op_byte, 0x1B: _op_shl, 0x1C: _op_shr, 0x1D: _op_sar,
    0x20: _op_keccak256,
    0x30: _op_address, 0x31: _op_balance, 0x32: _op_origin, 0x33: _op_caller,
    0x34: _op_callvalue, 0x35: _op_calldataload, 0x36: _op_calldatasize,
    0x37: _op_calldatacopy, 0x38: _op_codesize, 0x39: _op_codecopy,
    0x3A: _op_gasprice, 0x3B: _op_extcodesize, 0x3C: _op_extcodecopy,
    0x3D: _op_returndatasize, 0x3E: _op_returndatacopy, 0x3F: _op_extcodehash,
    0x40: _op_blockhash, 0x41: _op_coinbase, 0x42: _op_timestamp,
    0x43: _op_number, 0x44: _op_prevrandao, 0x45: _op_gaslimit,
    0x46: _op_chainid, 0x47: _op_selfbalance, 0x48: _op_basefee,
    0x50: _op_pop, 0x51: _op_mload, 0x52: _op_mstore, 0x53: _op_mstore8,
    0x54: _op_sload, 0x55: _op_sstore, 0x56: _op_jump, 0x57: _op_jumpi,
    0x58: _op_pc, 0x59: _op_msize, 0x5A: _op_gas, 0x5B: _op_jumpdest,
    0x5F: _op_push0,
    0xF0: _op_create, 0xF1: _op_call, 0xF2: _op_callcode, 0xF3: _op_return,
    0xF4: _op_delegatecall, 0xF5: _op_create2, 0xFA: _op_staticcall,
    0xFD: _op_revert, 0xFE: _op_invalid, 0xFF: _op_selfdestruct,
}
for _n in range(1, 33):
    OPCODES[0x5F + _n] = _make_push(_n)
for _n in range(1, 17):
    OPCODES[0x7F + _n] = _make_dup(_n)
    OPCODES[0x8F + _n] = _make_swap(_n)
for _n in range(5):
    OPCODES[0xA0 + _n] = _make_log(_n)


# ---------------------------------------------------------------------------
# precompiles
# ---------------------------------------------------------------------------

_SECP_P = 2 ** 256 - 2 ** 32 - 977
_SECP_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
_SECP_G = (
    0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
)


def _ec_add(p, q):
    if p is None:
        return q
    if q is None:
        return p
    if p[0] == q[0] and (p[1] + q[1]) % _SECP_P == 0:
        return None
    if p == q:
        lam = (3 * p[0] * p[0]) * pow(2 * p[1], -1, _SECP_P) % _SECP_P
    else:
        lam = (q[1] - p[1]) * pow(q[0] - p[0], -1, _SECP_P) % _SECP_P
    x = (lam * lam - p[0] - q[0]) % _SECP_P
    y = (lam * (p[0] - x) - p[1]) % _SECP_P
    return (x, y)


def _ec_mul(p, scalar):
    result = None
    addend = p
    while scalar:
        if scalar & 1:
            result = _ec_add(result, addend)
        addend = _ec_add(addend, addend)
        scalar >>= 1
    return result


def secp256k1_recover(msg_hash: bytes, v: int, r: int, s: int) -> bytes | None:
    """Recover the signer address; None when the signature is unusable."""
    if v not in (27, 28) or not (1 <= r < _SECP_N) or not (1 <= s < _SECP_N):
        return None
    x = r
    y_sq = (pow(x, 3, _SECP_P) + 7) % _SECP_P
    y = pow(y_sq, (_SECP_P + 1) // 4, _SECP_P)
    if pow(y, 2, _SECP_P) != y_sq:
        return None
    if y % 2 != (v - 27):
        y = _SECP_P - y
    point_r = (x, y)
    e = int.from_bytes(msg_hash, "big")
    r_inv = pow(r, -1, _SECP_N)
    u1 = (-e * r_inv) % _SECP_N
    u2 = (s * r_inv) % _SECP_N
    q = _ec_add(_ec_mul(_SECP_G, u1), _ec_mul(point_r, u2))
    if q is None:
        return None
    pub = q[0].to_bytes(32, "big") + q[1].to_bytes(32, "big")
    return keccak256(pub)[12:]


def _run_precompile(env: TxEnv, address: bytes, data: bytes, gas: int) -> FrameResult:
    index = address[-1]
    words = (len(data) + 31) // 32

    def out(cost: int, payload: bytes) -> FrameResult:
        if cost > gas:
            return FrameResult(False, b"", 0, halt_reason="out of gas")
        return FrameResult(True, payload, gas - cost)

    if index == 1:  # ecrecover
        cost = 3000
        if cost > gas:
            return FrameResult(False, b"", 0, halt_reason="out of gas")
        padded = data.ljust(128, b"\x00")
        h, v_word, r, s = padded[:32], padded[32:64], padded[64:96], padded[96:128]
        v = int.from_bytes(v_word, "big")
        recovered = secp256k1_recover(h, v, int.from_bytes(r, "big"), int.from_bytes(s, "big"))
        payload = b"" if recovered is None else recovered.rjust(32, b"\x00")
        return FrameResult(True, payload, gas - cost)
    if index == 2:
        return out(60 + 12 * words, hashlib.sha256(data).digest())
    if index == 3:
        try:
            digest = hashlib.new("ripemd160", data).digest()
        except ValueError:
            return FrameResult(False, b"", 0, halt_reason="ripemd160 unavailable")
        return out(600 + 120 * words, digest.rjust(32, b"\x00"))
    if index == 4:
        return out(15 + 3 * words, data)
    if index == 5:  # modexp, EIP-2565 pricing
        padded = data.ljust(96, b"\x00")
        b_len = int.from_bytes(padded[:32], "big")
        e_len = int.from_bytes(padded[32:64], "big")
        m_len = int.from_bytes(padded[64:96], "big")
        if b_len > 4096 or e_len > 4096 or m_len > 4096:
            return FrameResult(False, b"", 0, halt_reason="modexp input too large")
        body = data[96:].ljust(b_len + e_len + m_len, b"\x00")
        base = int.from_bytes(body[:b_len], "big")
        exp = int.from_bytes(body[b_len:b_len + e_len], "big")
        mod = int.from_bytes(body[b_len + e_len:b_len + e_len + m_len], "big")
        max_len = max(b_len, m_len)
        mult = ((max_len + 7) // 8) ** 2
        iter_count = max(1, e_len * 8 - 1 if e_len <= 32 else 8 * (e_len - 32) + max(exp.bit_length() - 1, 0))
        cost = max(200, mult * iter_count // 3)
        result = b"" if m_len == 0 else pow(base, exp, mod).to_bytes(m_len, "big") if mod else bytes(m_len)
        return out(cost, result)
    return FrameResult(False, b"", 0,
                       halt_reason=f"precompile {index} not supported by embedded engine")


# ---------------------------------------------------------------------------
# message execution
# ---------------------------------------------------------------------------

def execute_message(env: TxEnv, msg: Message) -> FrameResult:
    state = env.state
    checkpoint = state.checkpoint()
    sub_snap = env.substate.snapshot()

    def fail(reason: str, reverted: bool = False, output: bytes = b"", gas_left: int = 0):
        state.revert(checkpoint)
        env.substate.restore(sub_snap)
        return FrameResult(False, output, gas_left, reverted=reverted, halt_reason=reason)

    if msg.is_create:
        existing = state.peek(msg.to)
        if existing is not None and (existing.nonce > 0 or existing.code):
            return fail("create collision")
        state.account(msg.to).nonce = 1  # EIP-161

    if msg.transfer and msg.value:
        if state.balance(msg.sender) < msg.value:
            return fail("insufficient balance")
        state.sub_balance(msg.sender, msg.value)
        state.add_balance(msg.to, msg.value)

    if not msg.is_create and msg.code_address in PRECOMPILES:
        result = _run_precompile(env, msg.code_address, msg.data, msg.gas)
        if not result.success:
            return fail(result.halt_reason)
        state.commit(checkpoint)
        return result

    if not msg.code:
        state.commit(checkpoint)
        return FrameResult(True, b"", msg.gas)

    frame = Frame(env, msg)
    try:
        _run(frame)
        output = frame.output
    except _Stop:
        output = frame.output
    except _Revert as revert:
        return fail("revert", reverted=True, output=revert.data, gas_left=frame.gas)
    except VMError as error:
        return fail(error.reason)
    except DeadlineExceeded:
        # Unwind this frame's checkpoint so the transaction-level handler
        # sees a consistent stack, then keep propagating.
        state.revert(checkpoint)
        env.substate.restore(sub_snap)
        raise

    if msg.is_create:
        sched = env.schedule
        deposit = sched.code_deposit_byte * len(output)
        if len(output) > sched.max_code_size:
            return fail("code size limit exceeded")
        if sched.reject_ef_code and output[:1] == b"\xef":
            return fail("invalid code prefix")
        if deposit > frame.gas:
            return fail("out of gas")  # cannot pay code deposit
        frame.gas -= deposit
        state.account(msg.to).code = output
        state.commit(checkpoint)
        return FrameResult(True, output, frame.gas)

    state.commit(checkpoint)
    return FrameResult(True, output, frame.gas)


def _run(frame: Frame) -> None:
    code = frame.code
    size = len(code)
    env = frame.env
    while True:
        frame.steps += 1
        if frame.steps % 4096 == 0 and env.deadline is not None \
                and time.monotonic() > env.deadline:
            raise DeadlineExceeded
        if frame.pc >= size:
            raise _Stop
        op = code[frame.pc]
        handler = OPCODES.get(op)
        if handler is None:
            raise VMError("invalid opcode")
        frame.pc += 1
        handler(frame)


# ---------------------------------------------------------------------------
# transaction application
# ---------------------------------------------------------------------------

def intrinsic_gas(schedule: GasSchedule, data: bytes, is_create: bool) -> int:
    cost = schedule.tx
    if is_create:
        cost += schedule.tx_create
        if schedule.initcode_metering:
            cost += 2 * ((len(data) + 31) // 32)
    zeros = data.count(0)
    cost += schedule.tx_data_zero * zeros + schedule.tx_data_nonzero * (len(data) - zeros)
    return cost


@dataclass
class TxOutcome:
    result: TxResult
    created_address: bytes | None = None


def apply_transaction(
    state: State,
    block: BlockContext,
    schedule: GasSchedule,
    fork: Fork,
    *,
    sender: bytes,
    to: bytes | None,
    value: int,
    data: bytes,
    gas_limit: int,
    gas_price: int,
    chain_id: int,
    blockhash_fn,
    deadline: float | None = None,
    coinbase_credit: bool = False,
) -> TxOutcome:
    """Apply one transaction atomically; `to=None` creates a contract."""
    from patchlab.errors import ChainError, InsufficientFunds

    is_create = to is None
    intrinsic = intrinsic_gas(schedule, data, is_create)
    if gas_limit < intrinsic:
        # Treat the same way a node treats an invalid transaction: it never
        # executes, so the whole attempt is an out-of-gas result.
        return TxOutcome(TxResult(TxStatus.OUT_OF_GAS, gas_used=gas_limit,
                                  value_transferred=value,
                                  halt_reason="intrinsic gas exceeds limit"))

    upfront = value + gas_limit * gas_price
    if state.balance(sender) < upfront:
        raise InsufficientFunds(
            f"sender balance {state.balance(sender)} < value+fees {upfront}")

    substate = Substate()
    substate.accessed_addrs.add(sender)
    substate.accessed_addrs.update(PRECOMPILES)
    substate.accessed_addrs.add(block.coinbase)

    env = TxEnv(state=state, block=block, schedule=schedule, fork=fork,
                origin=sender, gas_price=gas_price, chain_id=chain_id,
                substate=substate, blockhash_fn=blockhash_fn, deadline=deadline)

    outer = state.checkpoint()
    state.sub_balance(sender, gas_limit * gas_price)
    sender_nonce = state.account(sender).nonce
    state.account(sender).nonce = sender_nonce + 1

    if is_create:
        target = keccak256(rlp.encode([sender, sender_nonce]))[12:]
        code = data
        call_data = b""
    else:
        target = to
        code = state.code(to)
        call_data = data
    substate.accessed_addrs.add(target)

    msg = Message(sender=sender, to=target, code_address=target, value=value,
                  transfer=True, data=call_data, gas=gas_limit - intrinsic,
                  depth=0, is_static=False, is_create=is_create, code=code)

    try:
        result = execute_message(env, msg)
    except DeadlineExceeded:
        state.revert(outer)
        raise

    gas_used = gas_limit - result.gas_left
    refund = min(max(substate.refund, 0), gas_used // schedule.refund_divisor)
    gas_used -= refund
    state.add_balance(sender, (gas_limit - gas_used) * gas_price)
    if coinbase_credit:
        state.add_balance(block.coinbase, gas_used * gas_price)

    if result.success:
        for address in substate.selfdestructs:
            state.delete_account(address)
        status = TxStatus.SUCCESS
        logs = tuple(substate.logs)
    elif result.reverted:
        status = TxStatus.REVERTED
        logs = ()
    else:
        status = TxStatus.OUT_OF_GAS
        logs = ()

    state.commit(outer)
    tx_result = TxResult(
        status=status,
        return_data=result.output,
        gas_used=gas_used,
        value_transferred=value if result.success else 0,
        logs=logs,
        halt_reason=result.halt_reason,
    )
    return TxOutcome(tx_result, target if (is_create and result.success) else None)
