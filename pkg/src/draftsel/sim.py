"""Monte Carlo block-efficiency simulation over synthetic autoregressive models."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .prob import TokenDist, sample_index, temperature_tilt
from .selection import Scheme, TwoStepIS, scheme_from_dict

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


class ConfigError(ValueError):
    pass


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def block_seed(seed: int, block: int) -> int:
    return splitmix64((splitmix64(seed & MASK64) + block) & MASK64)


def fnv1a64(tokens: Sequence[int], seed: int = 0) -> int:
    h = FNV_OFFSET ^ (seed & MASK64)
    for t in tokens:
        for b in int(t).to_bytes(8, "little", signed=False):
            h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


@dataclass(frozen=True)
class ToyLm:
    """Tabular next-token model keyed on the last ``context`` tokens.

    Each context hashes (with ``seed``) to a gamma-normalized vector that is
    then tilted by ``temperature``.  Two models sharing a seed but not a
    temperature behave like a target and a sharper or flatter draft.  With
    ``fixed`` set the model ignores context entirely.
    """

    n: int
    context: int = 1
    seed: int = 0
    temperature: float = 1.0
    concentration: float = 1.0
    fixed: tuple[float, ...] | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.n < 1 or self.context < 0:
            raise ConfigError("ToyLm needs n >= 1 and context >= 0")
        if self.temperature <= 0 or self.concentration <= 0:
            raise ConfigError("temperature and concentration must be positive")
        if self.fixed is not None and len(self.fixed) != self.n:
            raise ConfigError("fixed distribution length differs from n")

    def key(self, history: Sequence[int]) -> tuple[int, ...]:
        if self.fixed is not None or self.context == 0:
            return ()
        return tuple(history[-self.context:])

    def dist(self, history: Sequence[int]) -> TokenDist:
        k = self.key(history)
        d = self._cache.get(k)
        if d is None:
            if self.fixed is not None:
                base = TokenDist(self.fixed)
            else:
                rng = np.random.default_rng(fnv1a64(k, self.seed))
                g = rng.gamma(self.concentration, size=self.n) + 1e-300
                base = TokenDist(g / g.sum())
            d = temperature_tilt(base, self.temperature)
            self._cache[k] = d
        return d

    def to_dict(self) -> dict:
        d = {"n": self.n, "context": self.context, "seed": self.seed, "temperature": self.temperature,
             "concentration": self.concentration}
        if self.fixed is not None:
            d["fixed"] = list(self.fixed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ToyLm":
        known = {"n", "context", "seed", "temperature", "concentration", "fixed"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown model keys {sorted(extra)}")
        fixed = d.get("fixed")
        if fixed is not None:
            fixed = tuple(float(x) for x in fixed)
        n = d.get("n", len(fixed) if fixed is not None else None)
        if n is None:
            raise ConfigError("model needs n")
        return cls(int(n), int(d.get("context", 1)), int(d.get("seed", 0)), float(d.get("temperature", 1.0)),
                   float(d.get("concentration", 1.0)), fixed)


@dataclass
class SimConfig:
    """One simulation run.  ``max_len`` caps prompt plus drafted tokens per block."""

    target: ToyLm
    drafts: list[ToyLm]
    scheme: Scheme = field(default_factory=TwoStepIS)
    L: int = 5
    blocks: int = 1000
    seed: int = 0
    max_len: int | None = None
    prompt: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not self.drafts:
            raise ConfigError("at least one draft model is required (K >= 1)")
        if self.L < 1 or self.blocks < 1:
            raise ConfigError("L and blocks must be positive")
        if any(d.n != self.target.n for d in self.drafts):
            raise ConfigError("draft and target vocabularies differ")
        if any(not 0 <= t < self.target.n for t in self.prompt):
            raise ConfigError("prompt token outside vocabulary")
        if self.max_len is not None and self.max_len <= len(self.prompt):
            raise ConfigError("max_len leaves no room after the prompt")

    @property
    def K(self) -> int:
        return len(self.drafts)

    @property
    def draft_len(self) -> int:
        if self.max_len is None:
            return self.L
        return min(self.L, self.max_len - len(self.prompt))

    def to_dict(self) -> dict:
        return {
            "target": self.target.to_dict(),
            "drafts": [d.to_dict() for d in self.drafts],
            "scheme": self.scheme.to_dict(),
            "L": self.L,
            "blocks": self.blocks,
            "seed": self.seed,
            "max_len": self.max_len,
            "prompt": list(self.prompt),
        }

    @classmethod
    def from_dict(cls, d: dict, default_seed: int = 0) -> "SimConfig":
        try:
            target = ToyLm.from_dict(d["target"])
            if "drafts" in d:
                drafts = [ToyLm.from_dict(x) for x in d["drafts"]]
            else:
                drafts = [ToyLm.from_dict(d["draft"])] * int(d.get("K", 1))
            scheme = scheme_from_dict(d.get("scheme", {"scheme": "two_step"}))
            return cls(
                target,
                drafts,
                scheme,
                L=int(d.get("L", 5)),
                blocks=int(d.get("blocks", 1000)),
                seed=int(d.get("seed", default_seed)),
                max_len=d.get("max_len"),
                prompt=tuple(int(t) for t in d.get("prompt", [0])),
            )
        except KeyError as e:
            raise ConfigError(f"missing config key {e.args[0]!r}") from None
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path, default_seed: int = 0) -> "SimConfig":
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, default_seed)


@dataclass
class SimStats:
    scheme: str
    K: int
    L: int
    blocks: int
    block_efficiency: float
    stderr: float
    tokens_emitted: int
    accept_rate: list[float]
    reached: list[int]
    wall_clock_per_block: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        # wall-clock stays out so repeated runs serialize identically
        return {
            "scheme": self.scheme,
            "K": self.K,
            "L": self.L,
            "blocks": self.blocks,
            "block_efficiency": self.block_efficiency,
            "stderr": self.stderr,
            "tokens_emitted": self.tokens_emitted,
            "accept_rate": self.accept_rate,
            "reached": self.reached,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position", "reached", "accept_rate"])
        for t, (r, a) in enumerate(zip(self.reached, self.accept_rate)):
            w.writerow([t, r, f"{a:.12g}"])
        return buf.getvalue()

    def summary(self) -> str:
        return f"{self.scheme}: block efficiency {self.block_efficiency:.6f} +/- {self.stderr:.6f} ({self.blocks} blocks)"


class _Runner:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.bound = {}
        self.width = max([cfg.target.context] + [d.context for d in cfg.drafts])

    def scheme_at(self, history: list[int]):
        k = tuple(history[-self.width:]) if self.width else ()
        b = self.bound.get(k)
        if b is None:
            cfg = self.cfg
            b = cfg.scheme.bind([d.dist(history) for d in cfg.drafts], cfg.target.dist(history))
            self.bound[k] = b
        return b

    def draft(self, model: ToyLm, history: list[int], length: int, rng) -> list[int]:
        seq = []
        for _ in range(length):
            seq.append(sample_index(model.dist(history + seq).probs, rng.random()))
        return seq

    def block(self, b: int) -> tuple[int, list[bool]]:
        cfg = self.cfg
        rng = np.random.default_rng(block_seed(cfg.seed, b))
        L = cfg.draft_len
        seqs = [self.draft(d, list(cfg.prompt), L, rng) for d in cfg.drafts]
        accepted: list[int] = []
        outcomes = []
        for t in range(L):
            history = list(cfg.prompt) + accepted
            for k, d in enumerate(cfg.drafts):
                if seqs[k][:t] != accepted:
                    # diverged draft: redraft from the accepted prefix
                    seqs[k] = accepted + self.draft(d, history, L - t, rng)
            sel = self.scheme_at(history).select([s[t] for s in seqs], rng)
            outcomes.append(sel.accepted)
            if not sel.accepted:
                return t + 1, outcomes
            accepted.append(sel.token)
        return L + 1, outcomes


def run_block_sim(cfg: SimConfig) -> SimStats:
    """Simulate ``cfg.blocks`` independent blocks and aggregate block efficiency."""
    runner = _Runner(cfg)
    L = cfg.draft_len
    eff = np.empty(cfg.blocks)
    reached = np.zeros(L, dtype=np.int64)
    hits = np.zeros(L, dtype=np.int64)
    start = time.perf_counter()
    for b in range(cfg.blocks):
        e, outcomes = runner.block(b)
        eff[b] = e
        reached[: len(outcomes)] += 1
        hits[: len(outcomes)] += outcomes
    elapsed = time.perf_counter() - start
    mean = math.fsum(eff) / cfg.blocks
    if cfg.blocks > 1:
        var = math.fsum((eff - mean) ** 2) / (cfg.blocks - 1)
        stderr = math.sqrt(var / cfg.blocks)
    else:
        stderr = 0.0
    rate = [float(h / r) if r else 0.0 for h, r in zip(hits, reached)]
    return SimStats(
        scheme=cfg.scheme.name,
        K=cfg.K,
        L=L,
        blocks=cfg.blocks,
        block_efficiency=mean,
        stderr=stderr,
        tokens_emitted=int(eff.sum()),
        accept_rate=rate,
        reached=[int(r) for r in reached],
        wall_clock_per_block=elapsed / cfg.blocks,
    )


def analytic_block_efficiency(alpha: float, L: int) -> float:
    """Expected block efficiency when every position accepts independently with ``alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if L < 1:
        raise ValueError("L must be positive")
    if alpha == 1.0:
        return float(L + 1)
    return (1.0 - alpha ** (L + 1)) / (1.0 - alpha)


# -- random instances -------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    drafts: tuple[TokenDist, ...]
    q: TokenDist

    @property
    def p(self) -> TokenDist:
        return self.drafts[0]


FAMILIES = ("uniform", "sparse", "temperature")


def _simplex(rng, n: int, k: int | None = None) -> TokenDist:
    v = rng.exponential(size=n)
    if k is not None and k < n:
        keep = rng.choice(n, size=k, replace=False)
        mask = np.zeros(n, dtype=bool)
        mask[keep] = True
        v = np.where(mask, v, 0.0)
    return TokenDist(v / v.sum())


def gen_random_instance(
    seed: int | Sequence[int],
    n: int,
    family: str = "uniform",
    K: int = 2,
    identical: bool = True,
    k: int | None = None,
    T: float | None = None,
) -> Instance:
    """Deterministic random (drafts, target) instance.

    ``uniform`` draws every vector from the flat simplex, ``sparse`` keeps
    ``k`` nonzeros per vector, ``temperature`` tilts the target by ``T``
    (random in [0.5, 2] when omitted) to get the draft.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    rng = np.random.default_rng(seed)
    if family == "temperature":
        q = _simplex(rng, n)
        count = 1 if identical else K
        temps = [T if T is not None else float(rng.uniform(0.5, 2.0)) for _ in range(count)]
        drafts = [temperature_tilt(q, t) for t in temps]
    else:
        kk = None if family == "uniform" else (k if k is not None else max(1, n // 2))
        q = _simplex(rng, n, kk)
        drafts = [_simplex(rng, n, kk) for _ in range(1 if identical else K)]
    if identical:
        drafts = drafts * K
    return Instance(tuple(drafts), q)


def instance_pair(family: str = "uniform", **kw):
    """Adapter for harnesses that expect ``generator(seed, n) -> (p, q)``."""

    def gen(seed: int, n: int):
        inst = gen_random_instance(seed, n, family, K=1, **kw)
        return inst.p, inst.q

    return gen
