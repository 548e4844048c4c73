"""Backend flag space: configurations, the canonical grid, encoding and rendering."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import FormatError

# Unlimited bounds are represented by None throughout.
UNLIMITED = None

FLAG_FIELDS = (
    "context_bound",
    "strategy",
    "k_step",
    "unwind",
    "no_por",
    "no_goto_merge",
    "state_hashing",
    "add_symex_value_sets",
)
BOOLEAN_FIELDS = FLAG_FIELDS[4:]


class Strategy(str, enum.Enum):
    NONE = "None"
    INCR = "Incr"
    KINDUCTION = "KInduction"

    @property
    def code(self) -> int:
        return _STRATEGY_CODES[self]


_STRATEGY_CODES = {Strategy.NONE: 0, Strategy.INCR: 1, Strategy.KINDUCTION: 2}

DEFAULT_STRATEGY_FLAGS = {
    Strategy.INCR: "--incremental-bmc",
    Strategy.KINDUCTION: "--k-induction",
}


def _check_bound(name, value, allow_unlimited=True):
    if value is None and allow_unlimited:
        return
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class FlagConfiguration:
    """One assignment of the eight backend flags.

    ``context_bound`` and ``unwind`` use ``None`` for unlimited.  When the
    strategy is ``Strategy.NONE`` the k-step is meaningless and is normalized
    to 1, so two such configurations differing only in k-step compare equal.
    """

    context_bound: int | None = UNLIMITED
    strategy: Strategy = Strategy.NONE
    k_step: int = 1
    unwind: int | None = UNLIMITED
    no_por: bool = False
    no_goto_merge: bool = False
    state_hashing: bool = False
    add_symex_value_sets: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        _check_bound("context_bound", self.context_bound)
        _check_bound("unwind", self.unwind)
        _check_bound("k_step", self.k_step, allow_unlimited=False)
        for name in BOOLEAN_FIELDS:
            object.__setattr__(self, name, bool(getattr(self, name)))
        if self.strategy is Strategy.NONE:
            object.__setattr__(self, "k_step", 1)


def default_config() -> FlagConfiguration:
    """The backend's out-of-the-box settings."""
    return FlagConfiguration()


class FlagGrid(Sequence):
    """Ordered, duplicate-free list of configurations.

    The order matters: the predictor breaks ties by lowest index.
    """

    def __init__(self, configs: Iterable[FlagConfiguration]):
        self._configs = tuple(configs)
        self._index = {}
        for i, cfg in enumerate(self._configs):
            if cfg in self._index:
                raise ValueError(
                    f"duplicate configuration at index {i} "
                    f"(same as index {self._index[cfg]})"
                )
            self._index[cfg] = i

    def __getitem__(self, i):
        return self._configs[i]

    def __len__(self):
        return len(self._configs)

    def __iter__(self) -> Iterator[FlagConfiguration]:
        return iter(self._configs)

    def __eq__(self, other):
        if not isinstance(other, FlagGrid):
            return NotImplemented
        return self._configs == other._configs

    def __hash__(self):
        return hash(self._configs)

    def index(self, cfg, start=0, stop=None):
        i = self._index.get(cfg)
        if i is None:
            raise ValueError(f"{cfg} is not in the grid")
        return i

    def __contains__(self, cfg):
        return cfg in self._index

    def __repr__(self):
        return f"FlagGrid(<{len(self)} configurations>)"


GRID_CONTEXT_BOUNDS = (1, 2, 3, UNLIMITED)
GRID_UNWINDS = (1, 8, 32, 128, UNLIMITED)
GRID_STRATEGIES = ((Strategy.NONE, 1), (Strategy.INCR, 1), (Strategy.INCR, 4))


def canonical_grid() -> FlagGrid:
    """The built-in 240-configuration grid, row-major over its factors."""
    configs = []
    for cb, unwind, (strategy, k_step), no_por, no_goto_merge in itertools.product(
        GRID_CONTEXT_BOUNDS, GRID_UNWINDS, GRID_STRATEGIES, (False, True), (False, True)
    ):
        configs.append(
            FlagConfiguration(
                context_bound=cb,
                strategy=strategy,
                k_step=k_step,
                unwind=unwind,
                no_por=no_por,
                no_goto_merge=no_goto_merge,
            )
        )
    return FlagGrid(configs)


def encode(config: FlagConfiguration) -> list[int]:
    """Numeric vector of length 8; unlimited bounds become -1."""

    def bound(v):
        return -1 if v is None else v

    return [
        bound(config.context_bound),
        config.strategy.code,
        config.k_step,
        bound(config.unwind),
        int(config.no_por),
        int(config.no_goto_merge),
        int(config.state_hashing),
        int(config.add_symex_value_sets),
    ]


def decode(vector: Sequence[int]) -> FlagConfiguration:
    if len(vector) != len(FLAG_FIELDS):
        raise ValueError(f"expected {len(FLAG_FIELDS)} values, got {len(vector)}")
    codes = {code: s for s, code in _STRATEGY_CODES.items()}
    cb, strategy, k_step, unwind, *bools = (int(v) for v in vector)
    if strategy not in codes:
        raise ValueError(f"unknown strategy code {strategy}")
    return FlagConfiguration(
        None if cb == -1 else cb,
        codes[strategy],
        k_step,
        None if unwind == -1 else unwind,
        *(bool(b) for b in bools),
    )


def render_flags(config: FlagConfiguration, strategy_flags=None) -> list[str]:
    """Command-line arguments for ``config``; defaults produce no arguments.

    ``strategy_flags`` maps a Strategy to the option spelling used by a
    particular backend.
    """
    spellings = dict(DEFAULT_STRATEGY_FLAGS)
    if strategy_flags:
        spellings.update({Strategy(k): v for k, v in strategy_flags.items()})
    args = []
    if config.context_bound is not None:
        args += ["--context-bound", str(config.context_bound)]
    if config.strategy is not Strategy.NONE:
        args.append(spellings[config.strategy])
        args += ["--k-step", str(config.k_step)]
    if config.unwind is not None:
        args += ["--unwind", str(config.unwind)]
    for name in BOOLEAN_FIELDS:
        if getattr(config, name):
            args.append("--" + name.replace("_", "-"))
    return args


# -- grid files -----------------------------------------------------------


def format_grid(grid: Iterable[FlagConfiguration]) -> str:
    lines = ["# " + ",".join(FLAG_FIELDS)]
    for cfg in grid:
        lines.append(",".join("U" if v == -1 and i in (0, 3) else str(v)
                              for i, v in enumerate(encode(cfg))))
    return "\n".join(lines) + "\n"


def parse_grid(text: str) -> FlagGrid:
    configs = []
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(FLAG_FIELDS):
            raise FormatError(
                f"expected {len(FLAG_FIELDS)} comma-separated fields, got {len(fields)}",
                lineno,
            )
        try:
            values = [-1 if i in (0, 3) and f.upper() == "U" else int(f)
                      for i, f in enumerate(fields)]
            if any(v not in (0, 1) for v in values[4:]):
                raise ValueError("boolean fields must be 0 or 1")
            cfg = decode(values)
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        if cfg in seen:
            raise FormatError(f"duplicate of configuration on line {seen[cfg]}", lineno)
        seen[cfg] = lineno
        configs.append(cfg)
    if not configs:
        raise FormatError("grid file contains no configurations")
    return FlagGrid(configs)


def load_grid(source) -> FlagGrid:
    """Load a grid from a file path; ``None`` or ``"builtin"`` gives the canonical one."""
    if source is None or source == "builtin":
        return canonical_grid()
    with open(source, encoding="utf-8") as fh:
        return parse_grid(fh.read())
