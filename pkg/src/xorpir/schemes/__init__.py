"""
The seven schemes behind one interface.

Every function takes a :class:`~xorpir.params.SchemeParams` first and
dispatches on ``params.scheme``. Records and servers are 1-based.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Any, Sequence

from ..core import BitString, Database, ServerStorage, parse_storage, read_storage_header
from ..params import Scheme, SchemeParams
from .base import QuerySet, ResponsePayload, SchemeImpl, SchemeProfile, UserState
from .bitmask import Chor2, Con1
from .shift import Con2, Con3, Con6
from .stars import Con5
from .subblock import Con4

IMPLS: dict[Scheme, SchemeImpl] = {
    Scheme.CHOR2: Chor2(),
    Scheme.CON1: Con1(),
    Scheme.CON2: Con2(),
    Scheme.CON3: Con3(),
    Scheme.CON4: Con4(),
    Scheme.CON5: Con5(),
    Scheme.CON6: Con6(),
}


def impl(params: SchemeParams) -> SchemeImpl:
    return IMPLS[params.scheme]


def encode(params: SchemeParams, db: Database) -> list[ServerStorage]:
    """Place the database on the n servers."""
    return impl(params).encode(params, db)


def gen_query(params: SchemeParams, ell: int, rng: random.Random | int | None) -> QuerySet:
    """Sample the scheme's randomness and build the n queries for record ``ell``."""
    params.check_record(ell)
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    scheme = impl(params)
    return scheme.build_queries(params, ell, scheme.sample_randomness(params, ell, rng))


def build_queries(params: SchemeParams, ell: int, randomness: Any) -> QuerySet:
    """Queries for explicitly given randomness (used for enumeration and hand traces)."""
    return impl(params).build_queries(params, ell, randomness)


def answer(params: SchemeParams, storage: ServerStorage, r: int, query: BitString) -> ResponsePayload:
    params.check_server(r)
    return ResponsePayload(r, impl(params).answer(params, storage, r, query))


def reconstruct(
    params: SchemeParams, user_state: UserState, responses: Sequence[ResponsePayload | BitString]
) -> BitString:
    return impl(params).reconstruct(params, user_state, responses)


def profile(params: SchemeParams) -> SchemeProfile:
    return impl(params).profile(params)


def load_storage(path: str | Path, params: SchemeParams) -> ServerStorage:
    """Read a server file written by :func:`xorpir.core.save_storage` and attach its layout."""
    server_id, _ = read_storage_header(path)
    params.check_server(server_id)
    return parse_storage(Path(path).read_bytes(), impl(params).storage_layout(params, server_id))


__all__ = [
    "IMPLS",
    "QuerySet",
    "ResponsePayload",
    "SchemeProfile",
    "UserState",
    "answer",
    "build_queries",
    "encode",
    "gen_query",
    "impl",
    "load_storage",
    "profile",
    "reconstruct",
]
