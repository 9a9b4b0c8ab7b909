"""
Explicit asymptotically optimal n-server scheme built on the star graph of
:mod:`xorpir.sj_graph`.

Records are cut into n^k blocks. For each v in V server r returns
s_(r,v) = XOR_i pi_{b_i(r,v)}(X_i). The selectors b_i are 0 exactly where
v_i = 0; the others come from a random bijection psi on the non-zero-at-ell
vertices (for i = ell) and from random injections f_i on the components
(for i != ell), so two vertices in one star share every selector except the
ell-th and their XOR isolates a single block of X_ell.

Randomness is ``(f, psi)`` where ``f[i]`` lists f_i(C) for components C in
canonical order (``None`` at position ell) and ``psi`` lists psi over the
vertices of part1 in canonical order. All selector values are 1..n^k.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

from ..core import BitString, concat, pack_symbols, symbol_width, unpack_symbols
from ..errors import ParameterError, ProtocolError
from ..sj_graph import build_gamma, enumerate_V
from .base import SchemeImpl, SchemeProfile


@lru_cache(maxsize=None)
def nonzero_slots(n: int, k: int) -> tuple[tuple[int, tuple], ...]:
    """(i, v) pairs with v_i != 0, in lexicographic (i, v) order: the sent selectors."""
    V = enumerate_V(n, k)
    return tuple((i, v) for i in range(1, k + 1) for v in V if v[i - 1] != 0)


def random_injection(domain_size: int, codomain_size: int, rng) -> tuple[int, ...]:
    """Fisher-Yates shuffle of 1..codomain_size truncated to domain_size values."""
    values = list(range(1, codomain_size + 1))
    rng.shuffle(values)
    return tuple(values[:domain_size])


class Con5(SchemeImpl):
    def block_bits(self, params) -> int:
        return params.R // params.n**params.k

    # ---- randomness
    def sample_randomness(self, params, ell, rng):
        n, k = params.n, params.k
        gamma = build_gamma(ell, n, k)
        N = n**k
        f = tuple(
            None if i == ell else random_injection(len(gamma.components), N, rng)
            for i in range(1, k + 1)
        )
        psi = random_injection(len(gamma.part1), N, rng)
        return f, psi

    def randomness_space(self, params, ell):
        n, k = params.n, params.k
        gamma = build_gamma(ell, n, k)
        N = n**k
        values = range(1, N + 1)
        f_spaces = [
            [None] if i == ell else itertools.permutations(values, len(gamma.components))
            for i in range(1, k + 1)
        ]
        for f in itertools.product(*f_spaces):
            for psi in itertools.permutations(values, len(gamma.part1)):
                yield tuple(f), psi

    def randomness_space_size(self, params, ell):
        n, k = params.n, params.k
        gamma = build_gamma(ell, n, k)
        N = n**k
        return math.perm(N, len(gamma.components)) ** (k - 1) * math.perm(N, len(gamma.part1))

    # ---- queries
    def selectors(self, params, ell, randomness) -> list[dict[tuple[int, tuple], int]]:
        """Per server r, the map (i, v) -> b_i(r, v) over the non-zero slots."""
        n, k = params.n, params.k
        f, psi = randomness
        gamma = build_gamma(ell, n, k)
        psi_of = dict(zip(gamma.part1, psi))
        out = []
        for r in range(1, n + 1):
            b = {}
            for i, v in nonzero_slots(n, k):
                if i == ell:
                    b[(i, v)] = psi_of[(r, v)]
                else:
                    b[(i, v)] = f[i - 1][gamma.component_index[(r, v)]]
            out.append(b)
        return out

    def query_symbols(self, params, ell, randomness):
        f, psi = randomness
        n, k = params.n, params.k
        N = n**k
        gamma = build_gamma(ell, n, k)
        if len(f) != k or len(psi) != len(gamma.part1):
            raise ParameterError("randomness does not match the parameters")
        for i, fi in enumerate(f, start=1):
            if i == ell:
                continue
            if fi is None or len(fi) != len(gamma.components) or len(set(fi)) != len(fi):
                raise ParameterError(f"f_{i} is not an injection on the components")
        if sorted(psi) != list(range(1, N + 1)):
            raise ParameterError("psi is not a bijection onto 1..n^k")
        slots = nonzero_slots(n, k)
        return tuple(tuple(b[s] for s in slots) for b in self.selectors(params, ell, randomness))

    def serialize_query(self, params, r, q):
        # each selector in 1..n^k is sent as value-1 in k base-n digits of ceil(log2 n) bits
        n, k = params.n, params.k
        digits = []
        for value in q:
            x = value - 1
            ds = []
            for _ in range(k):
                x, d = divmod(x, n)
                ds.append(d)
            digits.extend(reversed(ds))
        return pack_symbols(digits, n)

    def parse_query(self, params, r, bits):
        n, k = params.n, params.k
        count = len(nonzero_slots(n, k))
        try:
            ds = unpack_symbols(bits, n, count * k)
        except ParameterError as e:
            raise ProtocolError(f"malformed query: {e}") from None
        values = []
        for pos in range(count):
            x = 0
            for d in ds[pos * k:(pos + 1) * k]:
                x = x * n + d
            values.append(x + 1)
        return tuple(values)

    # ---- server
    def answer(self, params, storage, r, query):
        q = self.parse_query(params, r, query)
        n, k = params.n, params.k
        size = self.block_bits(params)
        b = dict(zip(nonzero_slots(n, k), q))
        parts = []
        for v in enumerate_V(n, k):
            acc = 0
            for i in range(1, k + 1):
                if v[i - 1]:
                    sel = b[(i, v)]
                    acc ^= storage.segment(i).slice((sel - 1) * size, size).value
            parts.append(BitString(acc, size))
        return concat(parts)

    def full_response_length(self, params, r):
        return len(enumerate_V(params.n, params.k)) * self.block_bits(params)

    # ---- user
    def reconstruct(self, params, state, responses):
        c = self.expand_responses(params, state, responses)
        n, k, ell = params.n, params.k, state.ell
        size = self.block_bits(params)
        V = enumerate_V(n, k)
        vpos = {v: p for p, v in enumerate(V)}
        gamma = build_gamma(ell, n, k)

        def s(vertex):
            r, v = vertex
            return c[r - 1].slice(vpos[v] * size, size)

        blocks = []
        for vertex, center in self.recovery_plan(params, state):
            blocks.append(s(vertex) if center is None else s(vertex) ^ s(center))
        assert len(blocks) == n**k == len(gamma.part1)
        return concat(blocks)

    def recovery_plan(self, params, state):
        """For block j = 1..n^k: (psi^-1(j), star centre or None)."""
        n, k, ell = params.n, params.k, state.ell
        gamma = build_gamma(ell, n, k)
        _, psi = state.randomness
        inverse = {j: x for x, j in zip(gamma.part1, psi)}
        plan = []
        for j in range(1, n**k + 1):
            vertex = inverse[j]
            comp = gamma.component_index[vertex]
            plan.append((vertex, gamma.centers.get(comp)))
        return plan

    def profile(self, params):
        n, k, R = params.n, params.k, params.R
        V = (n**k - 1) // (n - 1)
        worst = Fraction(n * V * R, n**k)
        return SchemeProfile(
            upload_bits=n * (k * n ** (k - 1)) * k * symbol_width(n),
            worst_download_bits=worst,
            expected_download_bits=worst,
            total_storage_bits=n * k * R,
            per_server_storage_bits=k * R,
        )
