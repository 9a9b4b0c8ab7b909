"""Schemes whose queries are raw coefficient bits: the 2-server XOR scheme and its (R+1)-server variant."""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

from ..core import BitString, ServerStorage, xor_all
from ..errors import ProtocolError
from .base import SchemeImpl, SchemeProfile, UserState


class Chor2(SchemeImpl):
    """Two servers; server 1 gets a random k-bit mask, server 2 the same mask with bit ell flipped."""

    def sample_randomness(self, params, ell, rng):
        return tuple(rng.getrandbits(1) for _ in range(params.k))

    def randomness_space(self, params, ell):
        return itertools.product((0, 1), repeat=params.k)

    def randomness_space_size(self, params, ell):
        return 2**params.k

    def query_symbols(self, params, ell, alpha):
        beta = list(alpha)
        beta[ell - 1] ^= 1
        return (tuple(alpha), tuple(beta))

    def serialize_query(self, params, r, q):
        return BitString.from_bits(q)

    def parse_query(self, params, r, bits):
        if bits.length != params.k:
            raise ProtocolError(f"CHOR2 query must be {params.k} bits, got {bits.length}")
        return tuple(bits)

    def answer(self, params, storage, r, query):
        mask = self.parse_query(params, r, query)
        return xor_all((storage.segment(i) for i, a in enumerate(mask, start=1) if a), params.R)

    def full_response_length(self, params, r):
        return params.R

    def reconstruct(self, params, state, responses):
        c1, c2 = self.expand_responses(params, state, responses)
        return c1 ^ c2

    def profile(self, params):
        k, R = params.k, params.R
        return SchemeProfile(
            upload_bits=2 * k,
            worst_download_bits=Fraction(2 * R),
            expected_download_bits=Fraction(2 * R),
            total_storage_bits=2 * k * R,
            per_server_storage_bits=k * R,
        )


class Con1(SchemeImpl):
    """R+1 servers each asked for one parity bit over a random k x R coefficient array.

    The array is held as a kR-bit string in row-major (record, bit) order, which
    is also the order of the stored database, so a reply is one masked parity.
    """

    def sample_randomness(self, params, ell, rng):
        return BitString.random(params.k * params.R, rng)

    def randomness_space(self, params, ell):
        kR = params.k * params.R
        return (BitString(v, kR) for v in range(1 << kR))

    def randomness_space_size(self, params, ell):
        return 2 ** (params.k * params.R)

    def query_symbols(self, params, ell, alpha: BitString):
        kR, R = params.k * params.R, params.R
        qs = []
        for r in range(1, R + 1):
            pos = (ell - 1) * R + (r - 1)
            qs.append(BitString(alpha.value ^ (1 << (kR - 1 - pos)), kR))
        qs.append(alpha)
        return tuple(qs)

    def serialize_query(self, params, r, q):
        return q

    def parse_query(self, params, r, bits):
        if bits.length != params.k * params.R:
            raise ProtocolError(f"CON1 query must be {params.k * params.R} bits, got {bits.length}")
        return bits

    def is_omission(self, params, q):
        return q.is_zero()

    def answer(self, params, storage: ServerStorage, r, query):
        beta = self.parse_query(params, r, query)
        if params.skip_zero and beta.is_zero():
            return BitString.zeros(0)
        return BitString((beta.value & storage.payload.value).bit_count() & 1, 1)

    def full_response_length(self, params, r):
        return 1

    def reconstruct(self, params, state: UserState, responses: Sequence):
        c = self.expand_responses(params, state, responses)
        last = c[-1]
        return BitString.from_bits((c[r] ^ last).value for r in range(params.R))

    def profile(self, params):
        k, R = params.k, params.R
        worst = Fraction(R + 1)
        # each server's query is uniform on {0,1}^{kR}; an all-zero one needs no reply
        expected = worst * (1 - Fraction(1, 2 ** (k * R)))
        return SchemeProfile(
            upload_bits=k * R * (R + 1),
            worst_download_bits=worst,
            expected_download_bits=expected,
            total_storage_bits=(R + 1) * k * R,
            per_server_storage_bits=k * R,
        )
