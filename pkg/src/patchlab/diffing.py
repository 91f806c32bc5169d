"""Differential analysis: does a patch actually change the program?

Source comparison works on token streams with comments removed and
whitespace collapsed, so cosmetic rewrites never count as repairs.
Bytecode comparison strips compiler metadata first (configurable) so that
recompiling the same program under a different file name compares equal.
"""

from __future__ import annotations

from patchlab.bytecode import strip_metadata

# Multi-character operators, longest first, so maximal munch keeps
# `a ++ b` distinct from `a + + b`.
_OPERATORS = (
    ">>>=", "<<=", ">>=", "**", "++", "--", "&&", "||", "==", "!=",
    "<=", ">=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "=>", "->",
)


def tokenize_solidity(source: str) -> list[str]:
    """Lexical token stream: comments dropped, whitespace collapsed,
    string literals kept verbatim."""
    tokens: list[str] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n\f\v":
            i += 1
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            i = n if end == -1 else end + 1
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            i = n if end == -1 else end + 2
            continue
        if ch in "\"'":
            j = i + 1
            while j < n:
                if source[j] == "\\":
                    j += 2
                    continue
                if source[j] == ch:
                    j += 1
                    break
                j += 1
            else:
                j = n
            tokens.append(source[i:j])
            i = j
            continue
        if ch.isalpha() or ch == "_" or ch == "$":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            tokens.append(source[i:j])
            i = j
            continue
        if ch.isdigit():
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] in "._xX"):
                j += 1
            tokens.append(source[i:j])
            i = j
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(op)
                i += len(op)
                break
        else:
            tokens.append(ch)
            i += 1
    return tokens


def source_differs(original: str, patch: str) -> bool:
    """True iff the normalized token streams differ."""
    return tokenize_solidity(original) != tokenize_solidity(patch)


def bytecode_differs(original: bytes, patch: bytes, strip: bool = True) -> bool:
    """True iff the runtime images differ beyond compiler metadata.

    `strip=False` falls back to raw byte comparison (the dataset papers do
    not say whether they stripped; stripping is the shipped default).
    """
    if strip:
        return strip_metadata(original) != strip_metadata(patch)
    return original != patch
