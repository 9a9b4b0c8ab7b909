"""Shared types and the per-scheme protocol that every construction implements."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Sequence

from ..core import BitString, Database, ServerStorage
from ..errors import ParameterError, ProtocolError
from ..params import SchemeParams


@dataclass(frozen=True)
class UserState:
    """Private reconstruction data; never serialized into a query."""

    ell: int
    randomness: Any
    # decoded per-server query symbols, kept so reconstruction need not re-derive them
    queries: tuple = field(repr=False)


@dataclass(frozen=True)
class QuerySet:
    """One retrieval: the serialized query for each server plus the user's private state."""

    per_server: tuple[BitString, ...]
    user_state: UserState

    @property
    def upload_bits(self) -> tuple[int, ...]:
        return tuple(q.length for q in self.per_server)


@dataclass(frozen=True)
class ResponsePayload:
    server_id: int
    bits: BitString


@dataclass(frozen=True)
class SchemeProfile:
    """Closed-form costs of a parameter set, with log replaced by ceil(log2)."""

    upload_bits: int
    worst_download_bits: Fraction
    expected_download_bits: Fraction
    total_storage_bits: int
    per_server_storage_bits: int

    def to_dict(self) -> dict:
        return {
            "upload_bits": self.upload_bits,
            "worst_download_bits": _num(self.worst_download_bits),
            "expected_download_bits": _num(self.expected_download_bits),
            "total_storage_bits": self.total_storage_bits,
            "per_server_storage_bits": self.per_server_storage_bits,
        }


def _num(x: Fraction) -> int | str:
    return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class SchemeImpl:
    """Base class for one construction.

    Randomness is split from query building so verification can enumerate the
    randomness space exactly: ``gen_query`` is ``build_queries`` applied to
    ``sample_randomness``.
    """

    # ---- storage
    def encode(self, params: SchemeParams, db: Database) -> list[ServerStorage]:
        check_db(params, db)
        payload = db.as_bits()
        layout = {(i, 1): ((i - 1) * db.R, db.R) for i in range(1, db.k + 1)}
        return [ServerStorage(r, payload, layout) for r in range(1, params.n + 1)]

    def storage_layout(self, params: SchemeParams, server_id: int) -> dict:
        return {(i, 1): ((i - 1) * params.R, params.R) for i in range(1, params.k + 1)}

    def storage_bits(self, params: SchemeParams) -> int:
        return params.k * params.R

    # ---- randomness
    def sample_randomness(self, params: SchemeParams, ell: int, rng: random.Random) -> Any:
        raise NotImplementedError

    def randomness_space(self, params: SchemeParams, ell: int) -> Iterator[Any]:
        raise NotImplementedError

    def randomness_space_size(self, params: SchemeParams, ell: int) -> int:
        raise NotImplementedError

    # ---- queries
    def query_symbols(self, params: SchemeParams, ell: int, randomness: Any) -> tuple:
        """Structured per-server queries (tuple of length n)."""
        raise NotImplementedError

    def serialize_query(self, params: SchemeParams, r: int, q) -> BitString:
        raise NotImplementedError

    def parse_query(self, params: SchemeParams, r: int, bits: BitString):
        raise NotImplementedError

    def build_queries(self, params: SchemeParams, ell: int, randomness: Any) -> QuerySet:
        params.check_record(ell)
        qs = self.query_symbols(params, ell, randomness)
        bits = tuple(self.serialize_query(params, r, q) for r, q in enumerate(qs, start=1))
        return QuerySet(bits, UserState(ell, randomness, qs))

    # ---- server side
    def answer(self, params: SchemeParams, storage: ServerStorage, r: int, query: BitString) -> BitString:
        raise NotImplementedError

    def full_response_length(self, params: SchemeParams, r: int) -> int:
        """Length of a reply that is not a legal omission."""
        raise NotImplementedError

    def is_omission(self, params: SchemeParams, q) -> bool:
        return False

    # ---- user side
    def reconstruct(self, params: SchemeParams, state: UserState, responses: Sequence[BitString]) -> BitString:
        raise NotImplementedError

    def profile(self, params: SchemeParams) -> SchemeProfile:
        raise NotImplementedError

    # ---- helpers
    def expand_responses(
        self, params: SchemeParams, state: UserState, responses: Sequence[ResponsePayload | BitString]
    ) -> list[BitString]:
        """Order responses by server and turn legal omissions into all-zero strings."""
        by_server: dict[int, BitString] = {}
        for pos, resp in enumerate(responses, start=1):
            if isinstance(resp, ResponsePayload):
                by_server[resp.server_id] = resp.bits
            else:
                by_server[pos] = resp
        out = []
        for r in range(1, params.n + 1):
            expected = self.full_response_length(params, r)
            bits = by_server.get(r)
            q = state.queries[r - 1]
            if bits is None:
                raise ProtocolError(f"missing response from server {r}")
            if bits.length == expected:
                out.append(bits)
            elif bits.length == 0 and params.skip_zero and self.is_omission(params, q):
                out.append(BitString.zeros(expected))
            else:
                raise ProtocolError(f"server {r} replied with {bits.length} bits, expected {expected}")
        return out


def check_db(params: SchemeParams, db: Database) -> None:
    if (db.k, db.R) != (params.k, params.R):
        raise ParameterError(f"database is k={db.k}, R={db.R} but parameters say k={params.k}, R={params.R}")
