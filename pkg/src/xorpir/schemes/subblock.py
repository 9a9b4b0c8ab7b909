"""
Small per-server storage: records are cut into R/s blocks of s bits, each
block into t-1 sub-blocks, and server (u, r) keeps block u of every record.

Servers are grouped into t classes that share one query. With ``merge`` > 1,
``merge`` consecutive block positions u of a class live on one server. Server
ids run class-major: server ``(r - 1) * G + g`` is group g of class r, where
G = (R/s)/merge and group g holds u = (g-1)*merge + 1 .. g*merge.
"""

from __future__ import annotations

from fractions import Fraction

from ..core import BitString, ServerStorage, concat, symbol_width
from ..errors import ParameterError
from .base import SchemeProfile, check_db
from .shift import Con3


class Con4(Con3):
    def modulus(self, params):
        return params.t

    def sub_bits(self, params) -> int:
        return params.s // (params.t - 1)

    def server_class(self, params, server_id: int) -> tuple[int, int]:
        """server id -> (class r, group g)."""
        G = params.groups_per_class
        return (server_id - 1) // G + 1, (server_id - 1) % G + 1

    def server_id(self, params, r: int, g: int) -> int:
        return (r - 1) * params.groups_per_class + g

    def blocks_of_group(self, params, g: int) -> range:
        return range((g - 1) * params.merge + 1, g * params.merge + 1)

    def storage_layout(self, params, server_id):
        _, g = self.server_class(params, server_id)
        layout, offset = {}, 0
        for u in self.blocks_of_group(params, g):
            for i in range(1, params.k + 1):
                layout[(i, u)] = (offset, params.s)
                offset += params.s
        return layout

    def storage_bits(self, params):
        return params.k * params.s * params.merge

    def encode(self, params, db):
        check_db(params, db)
        out = []
        for sid in range(1, params.n + 1):
            _, g = self.server_class(params, sid)
            parts = [
                db.record(i).slice((u - 1) * params.s, params.s)
                for u in self.blocks_of_group(params, g)
                for i in range(1, params.k + 1)
            ]
            out.append(ServerStorage(sid, concat(parts), self.storage_layout(params, sid)))
        return out

    def query_symbols(self, params, ell, a):
        t = params.t
        if len(a) != params.k or any(not 0 <= x < t for x in a):
            raise ParameterError(f"randomness must be {params.k} elements of Z_{t}")
        per_class = []
        for r in range(1, t + 1):
            b = list(a)
            b[ell - 1] = (a[ell - 1] + r) % t
            per_class.append(tuple(b))
        return tuple(per_class[self.server_class(params, sid)[0] - 1] for sid in range(1, params.n + 1))

    def answer(self, params, storage, r, query):
        q = self.parse_query(params, r, query)
        _, g = self.server_class(params, r)
        sub = self.sub_bits(params)
        parts = []
        for u in self.blocks_of_group(params, g):
            acc = 0
            for i, b in enumerate(q, start=1):
                if b:
                    acc ^= storage.segment(i, u).slice((b - 1) * sub, sub).value
            parts.append(BitString(acc, sub))
        return concat(parts)

    def full_response_length(self, params, r):
        return params.merge * self.sub_bits(params)

    def is_omission(self, params, q):
        return False

    def class_queries(self, params, state) -> list[tuple]:
        """The query of each class r = 1..t."""
        G = params.groups_per_class
        return [state.queries[(r - 1) * G] for r in range(1, params.t + 1)]

    def reconstruct(self, params, state, responses):
        c = self.expand_responses(params, state, responses)
        col = [q[state.ell - 1] for q in self.class_queries(params, state)]
        sub = self.sub_bits(params)
        zero = self.pair_for(col, 0)
        out = []
        for u in range(1, params.blocks_per_record + 1):
            g = (u - 1) // params.merge + 1
            pos = (u - 1) % params.merge
            for j in range(1, params.t):
                r2 = self.pair_for(col, j)
                a = c[self.server_id(params, zero, g) - 1].slice(pos * sub, sub)
                b = c[self.server_id(params, r2, g) - 1].slice(pos * sub, sub)
                out.append(a ^ b)
        return concat(out)

    def recovery_pairs(self, params, state):
        col = [q[state.ell - 1] for q in self.class_queries(params, state)]
        zero = self.pair_for(col, 0)
        return [(j, zero, self.pair_for(col, j)) for j in range(1, params.t)]

    def profile(self, params):
        n, k, R, s, t = params.n, params.k, params.R, params.s, params.t
        return SchemeProfile(
            upload_bits=n * k * symbol_width(t),
            worst_download_bits=Fraction(t * R, t - 1),
            expected_download_bits=Fraction(t * R, t - 1),
            total_storage_bits=n * k * s * params.merge,
            per_server_storage_bits=k * s * params.merge,
        )
