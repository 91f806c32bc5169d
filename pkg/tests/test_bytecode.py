"""Metadata stripping against synthetically constructed CBOR blobs."""

from hypothesis import given, strategies as st

from patchlab.bytecode import strip_metadata

# CBOR map {"bzzr0": <32 bytes>}: a1 (map,1 pair) 65 "bzzr0" 58 20 <32b>
REAL_SHAPE_BLOB = bytes.fromhex("a1") + bytes.fromhex("65") + b"bzzr0" + \
    bytes.fromhex("5820") + bytes(range(32))
assert len(REAL_SHAPE_BLOB) == 41

# 43-byte variant: a1 65 <5-char key> 58 22 <34 bytes>
BLOB_43 = bytes.fromhex("a1") + bytes.fromhex("65") + b"fivek" + \
    bytes.fromhex("5822") + bytes(34)
assert len(BLOB_43) == 43

CODE = bytes.fromhex("6080604052600080fd")  # plain opcodes, no trailing CBOR


def test_strips_real_shape_blob():
    image = CODE + REAL_SHAPE_BLOB + (41).to_bytes(2, "big")
    assert strip_metadata(image) == CODE


def test_strips_43_byte_blob_with_002b_suffix():
    image = CODE + BLOB_43 + bytes.fromhex("002b")
    assert strip_metadata(image) == CODE


def test_two_byte_degenerate_input_unchanged():
    assert strip_metadata(bytes.fromhex("0000")) == bytes.fromhex("0000")


def test_non_conforming_suffix_passes_through():
    image = CODE + bytes(41) + (41).to_bytes(2, "big")  # 41 zero bytes: not a CBOR map
    assert strip_metadata(image) == image


def test_truncated_length_passes_through():
    image = b"\x01" + (999).to_bytes(2, "big")
    assert strip_metadata(image) == image


def test_nested_blobs_stripped_to_fixpoint():
    image = CODE + REAL_SHAPE_BLOB + (41).to_bytes(2, "big") \
        + BLOB_43 + (43).to_bytes(2, "big")
    assert strip_metadata(image) == CODE


@given(st.binary(max_size=200))
def test_idempotent_on_arbitrary_input(blob):
    once = strip_metadata(blob)
    assert strip_metadata(once) == once


@given(st.binary(max_size=120))
def test_output_is_prefix_of_input(blob):
    assert blob.startswith(strip_metadata(blob))
