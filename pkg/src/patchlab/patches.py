"""Tool-produced patch candidates and their on-disk layout.

Directory convention: `<patches_dir>/<tool>/<contract_id>/<patch_id>.sol`
for source patches, `.bin` (hex text) for runtime-bytecode patches.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

from patchlab.errors import CorpusError


class PatchKind(enum.Enum):
    SOURCE = "source"
    BYTECODE = "bytecode"


@dataclass(frozen=True)
class PatchCandidate:
    tool: str
    contract_id: str
    patch_id: str
    kind: PatchKind
    payload: str | bytes  # UTF-8 source or runtime bytecode, matching kind

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.tool, self.contract_id, self.patch_id)

    @property
    def source(self) -> str:
        assert self.kind is PatchKind.SOURCE
        return self.payload

    @property
    def runtime_bytecode(self) -> bytes:
        assert self.kind is PatchKind.BYTECODE
        return self.payload


def load_patches(patches_dir: str | Path) -> list[PatchCandidate]:
    patches_dir = Path(patches_dir)
    if not patches_dir.is_dir():
        return []
    found: dict[tuple, PatchCandidate] = {}
    for tool_dir in sorted(p for p in patches_dir.iterdir() if p.is_dir()):
        for contract_dir in sorted(p for p in tool_dir.iterdir() if p.is_dir()):
            for path in sorted(contract_dir.iterdir()):
                if path.suffix == ".sol":
                    patch = PatchCandidate(tool_dir.name, contract_dir.name,
                                           path.stem, PatchKind.SOURCE,
                                           path.read_text())
                elif path.suffix == ".bin":
                    text = path.read_text().strip()
                    patch = PatchCandidate(tool_dir.name, contract_dir.name,
                                           path.stem, PatchKind.BYTECODE,
                                           bytes.fromhex(text.removeprefix("0x")))
                else:
                    continue
                if patch.key in found:
                    raise CorpusError(f"duplicate patch {patch.key}")
                found[patch.key] = patch
    return list(found.values())
