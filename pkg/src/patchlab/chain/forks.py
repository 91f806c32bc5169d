"""Hard-fork profiles: opcode availability and gas accounting rules.

Three profiles cover the compiler eras the corpus spans:

* PETERSBURG — the pre-Istanbul rules 0.4.x/0.5.x contracts were written
  against (EIP-150 call costs, simple SSTORE, 15000-wei clear refund).
* ISTANBUL — EIP-1884 repricings plus EIP-2200 net SSTORE metering,
  for 0.6.x/0.7.x.
* SHANGHAI — warm/cold access accounting (EIP-2929), reduced refunds
  (EIP-3529), PUSH0 and initcode metering (EIP-3860), for 0.8.x.

The fork for a contract defaults from its compiler version and can be
overridden per scenario; every run report echoes the table used.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Fork(enum.Enum):
    PETERSBURG = "petersburg"
    ISTANBUL = "istanbul"
    SHANGHAI = "shanghai"


class SstoreMode(enum.Enum):
    LEGACY = "legacy"          # pre-Istanbul: 20000 set / 5000 reset, 15000 clear refund
    NET = "net"                # EIP-2200
    NET_WARM_COLD = "net2929"  # EIP-2200 adjusted by EIP-2929/3529


@dataclass(frozen=True)
class GasSchedule:
    # flat opcode tiers
    zero: int = 0
    base: int = 2
    verylow: int = 3
    low: int = 5
    mid: int = 8
    high: int = 10
    jumpdest: int = 1

    exp: int = 10
    exp_byte: int = 50
    keccak: int = 30
    keccak_word: int = 6
    copy_word: int = 3
    memory_word: int = 3
    quad_divisor: int = 512

    balance: int = 400
    extcodesize: int = 700
    extcodecopy: int = 700
    extcodehash: int = 400
    blockhash: int = 20
    sload: int = 200

    log: int = 375
    log_topic: int = 375
    log_data_byte: int = 8

    call: int = 700
    call_value: int = 9000
    call_stipend: int = 2300
    new_account: int = 25000
    create: int = 32000
    code_deposit_byte: int = 200
    selfdestruct: int = 5000
    selfdestruct_refund: int = 24000

    tx: int = 21000
    tx_create: int = 32000
    tx_data_zero: int = 4
    tx_data_nonzero: int = 68
    refund_divisor: int = 2

    # SSTORE parameters (interpretation depends on sstore_mode)
    sstore_mode: SstoreMode = SstoreMode.LEGACY
    sstore_set: int = 20000
    sstore_reset: int = 5000
    sstore_clear_refund: int = 15000
    sstore_noop: int = 200       # dirty/no-op write cost under net metering
    sstore_sentry: int = 2300    # EIP-2200: fail if gasleft <= sentry

    # EIP-2929 warm/cold accounting
    warm_cold: bool = False
    cold_account_access: int = 2600
    cold_sload: int = 2100
    warm_access: int = 100

    # opcode availability / limits
    has_shifts: bool = True        # Constantinople
    has_create2: bool = True
    has_extcodehash: bool = True
    has_chainid: bool = False      # Istanbul
    has_selfbalance: bool = False
    has_basefee: bool = False      # London
    has_push0: bool = False        # Shanghai
    initcode_metering: bool = False  # EIP-3860
    max_initcode_size: int = 49152
    max_code_size: int = 24576
    reject_ef_code: bool = False   # EIP-3541


PETERSBURG_SCHEDULE = GasSchedule()

ISTANBUL_SCHEDULE = GasSchedule(
    balance=700,
    extcodehash=700,
    sload=800,
    tx_data_nonzero=16,
    sstore_mode=SstoreMode.NET,
    sstore_noop=800,
    has_chainid=True,
    has_selfbalance=True,
)

SHANGHAI_SCHEDULE = GasSchedule(
    balance=0,        # folded into warm/cold account access
    extcodesize=0,
    extcodecopy=0,
    extcodehash=0,
    sload=0,
    call=0,
    tx_data_nonzero=16,
    refund_divisor=5,
    sstore_mode=SstoreMode.NET_WARM_COLD,
    sstore_reset=2900,             # 5000 - cold_sload
    sstore_clear_refund=4800,      # EIP-3529
    sstore_noop=100,
    selfdestruct_refund=0,         # EIP-3529
    warm_cold=True,
    has_chainid=True,
    has_selfbalance=True,
    has_basefee=True,
    has_push0=True,
    initcode_metering=True,
    reject_ef_code=True,
)

SCHEDULES: dict[Fork, GasSchedule] = {
    Fork.PETERSBURG: PETERSBURG_SCHEDULE,
    Fork.ISTANBUL: ISTANBUL_SCHEDULE,
    Fork.SHANGHAI: SHANGHAI_SCHEDULE,
}

# Default fork per compiler minor series; documented assumption, echoed in
# every run report.
FORK_DEFAULTS: dict[tuple[int, int], Fork] = {
    (0, 4): Fork.PETERSBURG,
    (0, 5): Fork.PETERSBURG,
    (0, 6): Fork.ISTANBUL,
    (0, 7): Fork.ISTANBUL,
}


def fork_for_compiler(version: str) -> Fork:
    """Fork a contract compiled with `version` is assumed to run on."""
    parts = version.split(".")
    series = (int(parts[0]), int(parts[1]))
    if series in FORK_DEFAULTS:
        return FORK_DEFAULTS[series]
    return Fork.SHANGHAI


def schedule_for(fork: Fork) -> GasSchedule:
    return SCHEDULES[fork]
