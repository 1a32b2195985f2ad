from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from raf.codec import b64url_decode, b64url_encode, restore_padding
from raf.errors import FormatError


def test_restore_padding_multiple_of_four_unchanged():
    assert restore_padding("YWJjZGVm") == "YWJjZGVm"
    assert restore_padding("") == ""


def test_restore_padding_appends_complement():
    # length 10 -> two '=' appended
    s = "YWJjZGVmZ2"
    assert len(s) == 10
    assert restore_padding(s) == s + "=="
    assert len(restore_padding("YWJjZQ")) % 4 == 0


@pytest.mark.parametrize("n", range(0, 40))
def test_restore_padding_always_yields_decodable_length(n):
    out = restore_padding("A" * n)
    assert len(out) % 4 == 0 or n % 4 == 1  # length 4k+1 is never valid base64


def test_encode_strips_padding():
    text = b64url_encode(b"\x00\x01\x02\x03")
    assert "=" not in text
    assert b64url_decode(text) == b"\x00\x01\x02\x03"


def test_decode_accepts_padded_and_unpadded():
    assert b64url_decode("AAAA") == b64url_decode("AAAA")
    assert b64url_decode("AA==") == b64url_decode("AA")


def test_decode_rejects_garbage():
    with pytest.raises(FormatError):
        b64url_decode("not*base64!")
    with pytest.raises(FormatError):
        b64url_decode("AAAAA")  # length 4k+1 cannot be padded into validity


@given(st.binary(max_size=300))
def test_round_trip(data):
    assert b64url_decode(b64url_encode(data)) == data
