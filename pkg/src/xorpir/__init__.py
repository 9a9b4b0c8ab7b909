"""Multi-server XOR private information retrieval with exact bit accounting."""

from .core import BitString, Database, ServerStorage, TranscriptReport, load_database, save_database
from .errors import FormatError, ParameterError, PIRError, ProtocolError, RetrievalError
from .params import Scheme, SchemeParams
from .schemes import answer, encode, gen_query, profile, reconstruct

__version__ = "0.1.0"

__all__ = [
    "BitString",
    "Database",
    "FormatError",
    "PIRError",
    "ParameterError",
    "ProtocolError",
    "RetrievalError",
    "Scheme",
    "SchemeParams",
    "ServerStorage",
    "TranscriptReport",
    "answer",
    "encode",
    "gen_query",
    "load_database",
    "profile",
    "reconstruct",
    "save_database",
]
