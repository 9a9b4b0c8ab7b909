"""Scheme identifiers and validated parameter sets."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace

from .errors import ParameterError


class Scheme(enum.Enum):
    CHOR2 = 1
    CON1 = 2
    CON2 = 3
    CON3 = 4
    CON4 = 5
    CON5 = 6
    CON6 = 7

    @property
    def wire_id(self) -> int:
        """Scheme byte used in network frames."""
        return self.value

    @classmethod
    def parse(cls, name: str | Scheme) -> Scheme:
        if isinstance(name, Scheme):
            return name
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ParameterError(f"unknown scheme {name!r}; choose from {', '.join(s.name for s in cls)}") from None


REPLICATED = frozenset(Scheme) - {Scheme.CON4}
SKIP_ZERO_SCHEMES = frozenset({Scheme.CON1, Scheme.CON3})


@dataclass(frozen=True)
class SchemeParams:
    """A scheme plus (n, k, R) and its scheme-specific knobs.

    ``n`` may be left as None wherever it is determined by the other fields
    (CHOR2, CON1, CON2, CON4). Construction validates every divisibility
    condition, so an instance is always usable.
    """

    scheme: Scheme
    k: int
    R: int
    n: int | None = None
    s: int | None = None
    t: int | None = None
    merge: int = 1
    skip_zero: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.k < 1:
            raise ParameterError("k must be at least 1")
        if self.R < 1:
            raise ParameterError("R must be at least 1")
        expected = self._derive_n()
        if self.n is None:
            object.__setattr__(self, "n", expected)
        elif expected is not None and self.n != expected:
            raise ParameterError(f"{self.scheme.name} requires n = {expected}, got n = {self.n}")
        self._check()

    def _derive_n(self) -> int | None:
        sc = self.scheme
        if sc is Scheme.CHOR2:
            return 2
        if sc in (Scheme.CON1, Scheme.CON2):
            return self.R + 1
        if sc is Scheme.CON4:
            if self.s is None or self.t is None:
                raise ParameterError("CON4 needs both s and t")
            if self.s < 1 or self.R % self.s:
                raise ParameterError(f"CON4 needs s | R (s={self.s}, R={self.R})")
            if self.t < 2 or self.s % (self.t - 1):
                raise ParameterError(f"CON4 needs t >= 2 and (t-1) | s (t={self.t}, s={self.s})")
            if self.merge < 1 or (self.R // self.s) % self.merge:
                raise ParameterError(f"CON4 needs merge | R/s (merge={self.merge}, R/s={self.R // self.s})")
            return self.t * (self.R // self.s) // self.merge
        return None

    def _check(self) -> None:
        sc, n, k, R = self.scheme, self.n, self.k, self.R
        if n is None:
            raise ParameterError(f"{sc.name} needs n")
        if sc is not Scheme.CON4:
            if self.s is not None or self.t is not None or self.merge != 1:
                raise ParameterError("s, t and merge only apply to CON4")
        if self.skip_zero and sc not in SKIP_ZERO_SCHEMES:
            raise ParameterError("skip-zero mode is only defined for CON1 and CON3")
        if sc is Scheme.CON3:
            if n < 2 or R % (n - 1):
                raise ParameterError(f"CON3 needs n >= 2 and (n-1) | R (n={n}, R={R})")
        elif sc is Scheme.CON5:
            if n < 2 or R % n**k:
                raise ParameterError(f"CON5 needs n >= 2 and n^k | R (n^k={n**k}, R={R})")
        elif sc is Scheme.CON6:
            if n < 2 or R % (n**k * (n - 1)):
                raise ParameterError(f"CON6 needs n >= 2 and n^k(n-1) | R (n^k(n-1)={n**k * (n - 1)}, R={R})")

    @property
    def replicated(self) -> bool:
        return self.scheme in REPLICATED

    @property
    def blocks_per_record(self) -> int:
        """R / s, the number of s-bit blocks in a record (CON4 only)."""
        if self.scheme is not Scheme.CON4:
            raise ParameterError("blocks_per_record only applies to CON4")
        return self.R // self.s

    @property
    def groups_per_class(self) -> int:
        """Servers per CON4 class after merging."""
        return self.blocks_per_record // self.merge

    def check_record(self, ell: int) -> None:
        if not 1 <= ell <= self.k:
            raise ParameterError(f"record {ell} outside 1..{self.k}")

    def check_server(self, r: int) -> None:
        if not 1 <= r <= self.n:
            raise ParameterError(f"server {r} outside 1..{self.n}")

    def with_skip_zero(self, on: bool = True) -> SchemeParams:
        return replace(self, skip_zero=on)

    def to_dict(self) -> dict:
        d = {"scheme": self.scheme.name, "n": self.n, "k": self.k, "R": self.R}
        if self.scheme is Scheme.CON4:
            d.update(s=self.s, t=self.t, merge=self.merge)
        if self.skip_zero:
            d["skip_zero"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SchemeParams:
        return cls(
            scheme=Scheme.parse(d["scheme"]),
            k=int(d["k"]),
            R=int(d["R"]),
            n=None if d.get("n") is None else int(d["n"]),
            s=None if d.get("s") is None else int(d["s"]),
            t=None if d.get("t") is None else int(d["t"]),
            merge=int(d.get("merge", 1)),
            skip_zero=bool(d.get("skip_zero", False)),
        )

    def to_spec(self) -> str:
        """Compact form accepted by :meth:`parse`, e.g. ``CON3:n=3,k=2,R=2``."""
        fields = ",".join(f"{key}={val}" for key, val in self.to_dict().items() if key != "scheme")
        return f"{self.scheme.name}:{fields}"

    @classmethod
    def parse(cls, text: str) -> SchemeParams:
        m = re.fullmatch(r"\s*(\w+)\s*:(.*)", text)
        if not m:
            raise ParameterError(f"expected SCHEME:key=value,..., got {text!r}")
        d: dict = {"scheme": m.group(1)}
        for item in filter(None, (p.strip() for p in m.group(2).split(","))):
            key, sep, val = item.partition("=")
            if not sep:
                raise ParameterError(f"bad parameter {item!r}")
            key = key.strip()
            if key == "skip_zero":
                d[key] = val.strip().lower() in ("1", "true", "yes")
            elif key in ("n", "k", "R", "s", "t", "merge"):
                d[key] = int(val)
            else:
                raise ParameterError(f"unknown parameter {key!r}")
        if "k" not in d or "R" not in d:
            raise ParameterError("parameters need k and R")
        return cls.from_dict(d)
