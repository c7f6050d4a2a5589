import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relbc.channels import (
    OneTimePad,
    PadExhausted,
    WireFormatError,
    bits_to_str,
    decode_outcomes,
    encode_outcomes,
    otp_decrypt,
    otp_encrypt,
    str_to_bits,
)


def pad_of(bits):
    return OneTimePad("t", np.array(bits, dtype=np.uint8))


class TestPad:
    def test_zero_pad(self):
        assert otp_encrypt(pad_of([0, 0, 0, 0]), [1, 0, 1, 0]).tolist() == [1, 0, 1, 0]

    def test_complement(self):
        assert otp_encrypt(pad_of([1, 1, 1, 1]), [1, 0, 1, 0]).tolist() == [0, 1, 0, 1]

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=200), st.integers(0, 2**32 - 1))
    def test_round_trip(self, plain, seed):
        pad = OneTimePad.generate("x", len(plain), np.random.default_rng(seed))
        mirror = pad.mirror()
        assert otp_decrypt(mirror, otp_encrypt(pad, plain)).tolist() == plain

    def test_exhaustion_never_reuses(self):
        pad = OneTimePad.generate("x", 8, np.random.default_rng(0))
        otp_encrypt(pad, [1] * 6)
        with pytest.raises(PadExhausted):
            otp_encrypt(pad, [1] * 3)
        assert pad.offset == 6

    @given(st.lists(st.integers(1, 20), min_size=1, max_size=20))
    def test_segments_disjoint(self, sizes):
        pad = OneTimePad.generate("x", sum(sizes), np.random.default_rng(1))
        for n in sizes:
            otp_encrypt(pad, np.zeros(n, dtype=np.uint8))
        covered = [i for a, b in pad.issued for i in range(a, b)]
        assert len(covered) == len(set(covered)) == sum(sizes)

    def test_ciphertext_unbiased(self):
        r = np.random.default_rng(2)
        plain = np.array([1, 1, 1, 1, 0, 0, 0, 1], dtype=np.uint8)
        runs = 10_000
        ct = np.stack([otp_encrypt(OneTimePad.generate("x", 8, r), plain) for _ in range(runs)])
        assert np.all(np.abs(ct.mean(0) - 0.5) <= 0.02)


class TestWireFormat:
    def test_definitional_example(self):
        bits = encode_outcomes(0, [1, 0], [True, True])
        expected = "0" + format(2, "032b") + "11" + "10"
        assert bits_to_str(bits) == expected

    def test_packing_rule(self):
        bits = encode_outcomes(1, [0, 1], [True, False, True])
        s = bits_to_str(bits)
        assert s[0] == "1"
        assert int(s[1:33], 2) == 3
        assert s[33:36] == "101"
        assert s[36:] == "01"

    @given(st.integers(0, 1), st.lists(st.booleans(), min_size=0, max_size=300), st.integers(0, 2**32 - 1))
    def test_round_trip(self, bit, detected, seed):
        detected = np.array(detected, dtype=bool)
        outcomes = np.random.default_rng(seed).integers(0, 2, int(detected.sum())).astype(np.uint8)
        b, o, d = decode_outcomes(encode_outcomes(bit, outcomes, detected))
        assert b == bit and np.array_equal(o, outcomes) and np.array_equal(d, detected)

    @given(st.integers(0, 1), st.lists(st.booleans(), min_size=1, max_size=64), st.integers(0, 2**32 - 1))
    def test_full_stack_round_trip(self, bit, detected, seed):
        r = np.random.default_rng(seed)
        detected = np.array(detected, dtype=bool)
        outcomes = r.integers(0, 2, int(detected.sum())).astype(np.uint8)
        plain = encode_outcomes(bit, outcomes, detected)
        pad = OneTimePad.generate("x", len(plain), r)
        wire = bits_to_str(otp_encrypt(pad, plain))
        b, o, d = decode_outcomes(otp_decrypt(pad.mirror(), str_to_bits(wire)))
        assert b == bit and np.array_equal(o, outcomes) and np.array_equal(d, detected)

    def test_length_mismatch(self):
        with pytest.raises(WireFormatError):
            encode_outcomes(0, [1, 0, 1], [True, True])

    @pytest.mark.parametrize("cut", [0, 10, 34, 36])
    def test_truncated_rejected(self, cut):
        bits = encode_outcomes(0, [1, 0], [True, False, True])
        with pytest.raises(WireFormatError):
            decode_outcomes(bits[:cut] if cut else bits[:0])

    def test_trailing_bits_rejected(self):
        bits = encode_outcomes(0, [1, 0], [True, True])
        with pytest.raises(WireFormatError):
            decode_outcomes(np.concatenate([bits, [1]]))

    def test_bitstring_text(self):
        assert str_to_bits("0110").tolist() == [0, 1, 1, 0]
        with pytest.raises(WireFormatError):
            str_to_bits("01x0")
