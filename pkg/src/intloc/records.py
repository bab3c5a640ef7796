"""Experiment records, the sweep CSV format and the flat sweep config file."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass, fields
from datetime import datetime, timezone

from .rates import SupError, SweepConfig, SweepConfigError

HEADER = ("dist,n,delta,x,approx_kind,approx_value,oracle_kind,oracle_value,"
          "oracle_half_width,abs_err_per_delta,seed,timestamp")
SUMMARY_X = "sup"

REQUIRED_KEYS = ("dist", "n_list", "delta", "oracle", "approx", "grid.m", "grid.s", "out")
OPTIONAL_KEYS = ("seed", "h", "samples")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key {key!r}: {message}")


def fmt(value: float) -> str:
    return "%.17g" % value


@dataclass(frozen=True)
class ExperimentRecord:
    """One CSV row.  ``x`` is a number for grid points and ``"sup"`` for the
    per-n summary row, which repeats the grid point attaining the sup."""

    dist: str
    n: int
    delta: float
    x: float | str
    approx_kind: str
    approx_value: float
    oracle_kind: str
    oracle_value: float
    oracle_half_width: float
    abs_err_per_delta: float
    seed: int
    timestamp: str

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None or v == "":
                raise ValueError(f"field {f.name} is empty")
        expect = abs(self.approx_value - self.oracle_value) / self.delta
        if not math.isclose(self.abs_err_per_delta, expect, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("abs_err_per_delta does not match |approx - oracle| / delta")

    @property
    def is_summary(self) -> bool:
        return self.x == SUMMARY_X

    def cells(self) -> list[str]:
        out = []
        for v in astuple(self):
            out.append(fmt(v) if isinstance(v, float) else str(v))
        return out

    @classmethod
    def from_cells(cls, cells: list[str]) -> "ExperimentRecord":
        if len(cells) != 12:
            raise ValueError(f"expected 12 columns, got {len(cells)}")
        d, n, delta, x, ak, av, ok, ov, hw, err, seed, ts = cells
        return cls(d, int(n), float(delta), x if x == SUMMARY_X else float(x), ak,
                   float(av), ok, float(ov), float(hw), float(err), int(seed), ts)


def run_timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def sweep_records(cfg: SweepConfig, results: list[SupError], timestamp: str):
    """Grid-point rows for each n followed by that n's summary row."""
    rows = []
    for res in results:
        def row(x, p):
            return ExperimentRecord(cfg.dist, res.n, cfg.delta, x, cfg.approx,
                                    p.approx_value, cfg.oracle, p.oracle_value,
                                    p.oracle_half_width, p.abs_err / cfg.delta,
                                    cfg.seed, timestamp)
        rows.extend(row(p.x, p) for p in res.points)
        rows.append(row(SUMMARY_X, res.argmax_point))
    return rows


def render_csv(records) -> str:
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in records:
        w.writerow(r.cells())
    return buf.getvalue()


def write_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(render_csv(records))


def read_csv(path) -> list[ExperimentRecord]:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != HEADER:
        raise ValueError(f"{path}: missing or wrong header line")
    return [ExperimentRecord.from_cells(c) for c in csv.reader(lines[1:]) if c]


def summary_points(records) -> list[tuple[int, float]]:
    """``(n, sup per-unit error)`` from the summary rows, ordered by n."""
    return sorted((r.n, r.abs_err_per_delta) for r in records if r.is_summary)


# ---------------------------------------------------------------------------
# config


def parse_config_text(text: str) -> dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or not key:
            name = line.split()[0] if not sep else f"line {lineno}"
            raise ConfigError(name, "expected 'key = value'")
        if key not in REQUIRED_KEYS + OPTIONAL_KEYS:
            raise ConfigError(key, "unknown key")
        if key in raw:
            raise ConfigError(key, "given twice")
        if not value:
            raise ConfigError(key, "empty value")
        raw[key] = value
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(key, "missing")
    return raw


def _convert(raw: dict[str, str], key: str, conv):
    try:
        return conv(raw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"bad value {raw[key]!r} ({exc})") from None


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(p) for p in s.split(","))


def _count(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def build_sweep_config(raw: dict[str, str], seed: int | None = None) -> tuple[SweepConfig, str]:
    """Typed sweep config and output path; ``seed`` overrides the file's value."""
    kw = dict(
        dist=raw["dist"],
        n_list=_convert(raw, "n_list", _int_list),
        delta=_convert(raw, "delta", float),
        oracle=raw["oracle"],
        approx=raw["approx"],
        m=_convert(raw, "grid.m", float),
        s=_convert(raw, "grid.s", float),
    )
    if "h" in raw:
        kw["h"] = _convert(raw, "h", float)
    if "samples" in raw:
        kw["samples"] = _convert(raw, "samples", _count)
    kw["seed"] = seed if seed is not None else (
        _convert(raw, "seed", int) if "seed" in raw else 0)
    key_of = {"m": "grid.m", "s": "grid.s"}
    try:
        cfg = SweepConfig(**kw)
    except SweepConfigError as exc:
        raise ConfigError(key_of.get(exc.field, exc.field), str(exc)) from None
    return cfg, raw["out"]


def load_sweep_config(path, seed: int | None = None) -> tuple[SweepConfig, str]:
    with open(path) as fh:
        return build_sweep_config(parse_config_text(fh.read()), seed)
