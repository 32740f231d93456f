"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, replace

from .._validation import check_int, check_real
from ..errors import InvalidArgument

_ALIASES = {"lambda": "param", "lam": "param", "r": "param"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    param: float
    d: int
    n_list: tuple
    reps: int
    master_seed: int = 0
    output_path: str | None = None
    threads: int | str = 1
    bootstrap: int = 200
    block: int = 20_000
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        model = str(self.model).upper()
        if model not in ("ER", "GG"):
            raise InvalidArgument(f"model must be ER or GG, got {self.model!r}")
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "param", check_real(float(self.param), "lambda/r", lower=0.0,
                                                     lower_open=True))
        check_int(self.d, "d", min_value=0)
        n_list = tuple(int(v) for v in self.n_list)
        if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise InvalidArgument("n_list must be non-empty and strictly increasing")
        object.__setattr__(self, "n_list", n_list)
        check_int(self.reps, "reps", min_value=1000)
        seed = int(self.master_seed)
        if not 0 <= seed < 2**64:
            raise InvalidArgument("master_seed must fit in 64 unsigned bits")
        if self.threads != "auto":
            check_int(self.threads, "threads", min_value=1)
        check_int(self.block, "block", min_value=1)

    @property
    def param_name(self):
        return "lambda" if self.model == "ER" else "r"

    @property
    def n_threads(self):
        return (os.cpu_count() or 1) if self.threads == "auto" else int(self.threads)

    def canonical_text(self):
        """Everything that determines the output bytes (not threads or paths)."""
        keys = [("model", self.model), (self.param_name, repr(self.param)), ("d", self.d),
                ("n_list", ",".join(map(str, self.n_list))), ("reps", self.reps),
                ("master_seed", self.master_seed), ("bootstrap", self.bootstrap),
                ("block", self.block)]
        keys += sorted((k, v) for k, v in self.extra.items())
        return "\n".join(f"{k}={v}" for k, v in keys) + "\n"

    def config_hash(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"line {lineno}: expected key = value")
        k, v = (t.strip() for t in line.split("=", 1))
        raw[_ALIASES.get(k, k)] = v
    try:
        kw = dict(
            model=raw.pop("model"),
            param=float(raw.pop("param")),
            d=int(raw.pop("d")),
            n_list=tuple(int(t) for t in raw.pop("n_list").replace(" ", "").split(",") if t),
            reps=int(float(raw.pop("reps"))),
        )
    except KeyError as exc:
        raise InvalidArgument(f"missing config key {exc.args[0]!r}") from None
    if "master_seed" in raw:
        kw["master_seed"] = int(raw.pop("master_seed"))
    if "output_path" in raw:
        kw["output_path"] = raw.pop("output_path")
    if "threads" in raw:
        t = raw.pop("threads")
        kw["threads"] = "auto" if t == "auto" else int(t)
    for k in ("bootstrap", "block"):
        if k in raw:
            kw[k] = int(float(raw.pop(k)))
    kw["extra"] = raw
    return ExperimentConfig(**kw)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())
