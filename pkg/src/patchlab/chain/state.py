"""World state with checkpoint/revert semantics.

Checkpoints take structural copies of the account map.  Dataset-scale
scenarios touch a handful of accounts with small storage, so copying is
cheaper and far harder to get wrong than a write journal.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class Account:
    nonce: int = 0
    balance: int = 0
    code: bytes = b""
    storage: dict[int, int] = field(default_factory=dict)

    def copy(self) -> "Account":
        return Account(self.nonce, self.balance, self.code, dict(self.storage))

    @property
    def is_dead(self) -> bool:
        """EIP-161 emptiness: drives the new-account surcharge on value transfer."""
        return self.nonce == 0 and self.balance == 0 and not self.code


class State:
    def __init__(self):
        self._accounts: dict[bytes, Account] = {}
        self._checkpoints: list[dict[bytes, Account]] = []

    def account(self, address: bytes) -> Account:
        acct = self._accounts.get(address)
        if acct is None:
            acct = Account()
            self._accounts[address] = acct
        return acct

    def peek(self, address: bytes) -> Account | None:
        return self._accounts.get(address)

    def exists(self, address: bytes) -> bool:
        return address in self._accounts

    def is_dead(self, address: bytes) -> bool:
        acct = self._accounts.get(address)
        return acct is None or acct.is_dead

    def balance(self, address: bytes) -> int:
        acct = self._accounts.get(address)
        return 0 if acct is None else acct.balance

    def code(self, address: bytes) -> bytes:
        acct = self._accounts.get(address)
        return b"" if acct is None else acct.code

    def storage(self, address: bytes, slot: int) -> int:
        acct = self._accounts.get(address)
        return 0 if acct is None else acct.storage.get(slot, 0)

    def set_storage(self, address: bytes, slot: int, value: int) -> None:
        acct = self.account(address)
        if value == 0:
            acct.storage.pop(slot, None)
        else:
            acct.storage[slot] = value

    def add_balance(self, address: bytes, amount: int) -> None:
        self.account(address).balance += amount

    def sub_balance(self, address: bytes, amount: int) -> None:
        acct = self.account(address)
        if acct.balance < amount:
            raise ValueError("balance underflow")
        acct.balance -= amount

    def delete_account(self, address: bytes) -> None:
        self._accounts.pop(address, None)

    def all_addresses(self) -> list[bytes]:
        return list(self._accounts)

    # checkpointing

    def checkpoint(self) -> int:
        self._checkpoints.append({a: acct.copy() for a, acct in self._accounts.items()})
        return len(self._checkpoints) - 1

    def commit(self, token: int) -> None:
        assert token == len(self._checkpoints) - 1, "checkpoints must nest"
        self._checkpoints.pop()

    def revert(self, token: int) -> None:
        assert token == len(self._checkpoints) - 1, "checkpoints must nest"
        self._accounts = self._checkpoints.pop()

    def export(self) -> dict[bytes, Account]:
        """Deep copy of the account map (for chain-level snapshots)."""
        return {a: acct.copy() for a, acct in self._accounts.items()}

    def restore(self, exported: dict[bytes, Account]) -> None:
        self._accounts = {a: acct.copy() for a, acct in exported.items()}
