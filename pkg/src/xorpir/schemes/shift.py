"""
Cyclic-shift schemes: every server sees a vector in Z_m^k in which only the
``ell`` coordinate is shifted by the server index.

``Con3`` is the n-server block scheme; ``Con2`` is the same scheme with
m = R + 1 servers and one-bit blocks; ``Con6`` reuses the queries of ``Con3``
and spreads each reply over all shifts x in Z_n^k so that worst-case download
equals the average download of ``Con3``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

from ..core import BitString, concat, pack_symbols, symbol_width, unpack_symbols
from ..errors import ParameterError, ProtocolError
from .base import SchemeImpl, SchemeProfile


def residue_vectors(m: int, k: int):
    return itertools.product(range(m), repeat=k)


class Con3(SchemeImpl):
    def modulus(self, params) -> int:
        return params.n

    def block_bits(self, params) -> int:
        return params.R // (self.modulus(params) - 1)

    def sample_randomness(self, params, ell, rng):
        m = self.modulus(params)
        return tuple(rng.randrange(m) for _ in range(params.k))

    def randomness_space(self, params, ell):
        return residue_vectors(self.modulus(params), params.k)

    def randomness_space_size(self, params, ell):
        return self.modulus(params) ** params.k

    def query_symbols(self, params, ell, a):
        m = self.modulus(params)
        if len(a) != params.k or any(not 0 <= x < m for x in a):
            raise ParameterError(f"randomness must be {params.k} elements of Z_{m}")
        qs = []
        for r in range(1, params.n + 1):
            b = list(a)
            b[ell - 1] = (a[ell - 1] + r) % m
            qs.append(tuple(b))
        return tuple(qs)

    def serialize_query(self, params, r, q):
        return pack_symbols(q, self.modulus(params))

    def parse_query(self, params, r, bits):
        try:
            return tuple(unpack_symbols(bits, self.modulus(params), params.k))
        except ParameterError as e:
            raise ProtocolError(f"malformed query: {e}") from None

    def is_omission(self, params, q):
        return not any(q)

    def block(self, params, storage, i: int, b: int) -> BitString:
        """pi_b(X_i); b = 0 is the all-zero block."""
        size = self.block_bits(params)
        if b == 0:
            return BitString.zeros(size)
        return storage.segment(i).slice((b - 1) * size, size)

    def answer(self, params, storage, r, query):
        q = self.parse_query(params, r, query)
        size = self.block_bits(params)
        if params.skip_zero and not any(q):
            return BitString.zeros(0)
        acc = 0
        for i, b in enumerate(q, start=1):
            if b:
                acc ^= self.block(params, storage, i, b).value
        return BitString(acc, size)

    def full_response_length(self, params, r):
        return self.block_bits(params)

    def pair_for(self, q_ell_column, target: int) -> int:
        """The 1-based server whose ell-th symbol equals ``target``."""
        return q_ell_column.index(target) + 1

    def reconstruct(self, params, state, responses):
        c = self.expand_responses(params, state, responses)
        col = [q[state.ell - 1] for q in state.queries]
        zero = self.pair_for(col, 0)
        blocks = []
        for j in range(1, self.modulus(params)):
            blocks.append(c[zero - 1] ^ c[self.pair_for(col, j) - 1])
        return concat(blocks)

    def recovery_pairs(self, params, state) -> list[tuple[int, int, int]]:
        """(block j, server r with symbol 0, server r' with symbol j) for each block."""
        col = [q[state.ell - 1] for q in state.queries]
        zero = self.pair_for(col, 0)
        return [(j, zero, self.pair_for(col, j)) for j in range(1, self.modulus(params))]

    def profile(self, params):
        n, k, R = params.n, params.k, params.R
        worst = Fraction(n * R, n - 1)
        # a server is sent the all-zero vector with probability 1/n^k and may stay silent
        expected = (1 - Fraction(1, n**k)) * worst
        return SchemeProfile(
            upload_bits=n * k * symbol_width(n),
            worst_download_bits=worst,
            expected_download_bits=expected,
            total_storage_bits=n * k * R,
            per_server_storage_bits=k * R,
        )


class Con2(Con3):
    """Con3 with n = R + 1: blocks are single bits and symbols live in Z_{R+1}."""

    def modulus(self, params):
        return params.R + 1

    def is_omission(self, params, q):
        return False

    def profile(self, params):
        k, R = params.k, params.R
        return SchemeProfile(
            upload_bits=k * (R + 1) * symbol_width(R + 1),
            worst_download_bits=Fraction(R + 1),
            expected_download_bits=Fraction(R + 1),
            total_storage_bits=(R + 1) * k * R,
            per_server_storage_bits=k * R,
        )


class Con6(Con3):
    """
    Averaging variant of Con3.

    Records are cut into n^k (n-1) blocks indexed by (b, x), b in 1..n-1 and
    x in Z_n^k, laid out with b outermost and x in lexicographic order. Server r
    returns, for every x with x + q_r != 0, the XOR over i of block
    (b_ir + x_i, x) of X_i, concatenated in lexicographic x order.
    """

    def block_bits(self, params):
        n, k = params.n, params.k
        return params.R // (n**k * (n - 1))

    def is_omission(self, params, q):
        return False

    @staticmethod
    def x_rank(x, n: int) -> int:
        rank = 0
        for d in x:
            rank = rank * n + d
        return rank

    def block_at(self, params, storage, i: int, b: int, x) -> int:
        """Integer value of pi_(b, x)(X_i); b = 0 gives zero."""
        if b == 0:
            return 0
        n, k = params.n, params.k
        size = self.block_bits(params)
        index = (b - 1) * n**k + self.x_rank(x, n)
        return storage.segment(i).slice(index * size, size).value

    def omitted_x(self, params, q) -> tuple:
        n = params.n
        return tuple((-b) % n for b in q)

    def answer(self, params, storage, r, query):
        q = self.parse_query(params, r, query)
        n, k = params.n, params.k
        size = self.block_bits(params)
        skip = self.omitted_x(params, q)
        parts = []
        for x in residue_vectors(n, k):
            if x == skip:
                continue
            acc = 0
            for i in range(1, k + 1):
                acc ^= self.block_at(params, storage, i, (q[i - 1] + x[i - 1]) % n, x)
            parts.append(BitString(acc, size))
        return concat(parts)

    def full_response_length(self, params, r):
        return (params.n**params.k - 1) * self.block_bits(params)

    def string_for(self, params, q, response: BitString, x) -> BitString:
        """c_(r, x) from server r's concatenated reply; all-zero for the omitted x."""
        n = params.n
        size = self.block_bits(params)
        skip = self.omitted_x(params, q)
        if x == skip:
            return BitString.zeros(size)
        pos = self.x_rank(x, n)
        if pos > self.x_rank(skip, n):
            pos -= 1
        return response.slice(pos * size, size)

    def reconstruct(self, params, state, responses):
        c = self.expand_responses(params, state, responses)
        n, k, ell = params.n, params.k, state.ell
        col = [q[ell - 1] for q in state.queries]
        blocks = []
        for j in range(1, n):
            for x in residue_vectors(n, k):
                r = self.pair_for([(b + x[ell - 1]) % n for b in col], 0)
                r2 = self.pair_for([(b + x[ell - 1]) % n for b in col], j)
                blocks.append(
                    self.string_for(params, state.queries[r - 1], c[r - 1], x)
                    ^ self.string_for(params, state.queries[r2 - 1], c[r2 - 1], x)
                )
        return concat(blocks)

    def profile(self, params):
        n, k, R = params.n, params.k, params.R
        worst = (1 - Fraction(1, n**k)) * Fraction(n * R, n - 1)
        return SchemeProfile(
            upload_bits=n * k * symbol_width(n),
            worst_download_bits=worst,
            expected_download_bits=worst,
            total_storage_bits=n * k * R,
            per_server_storage_bits=k * R,
        )
