"""Time-tagged detection streams: data model, file I/O, coincidence search,
pulse assignment and stroboscopic folding.

All timestamps are 64-bit integers in picoseconds; this module never does
floating-point time arithmetic.
"""
from __future__ import annotations

import heapq
import io
import struct
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    MissingTriggerError,
    OrderingError,
    ParseError,
    UsageError,
)

CHANNELS = ("A", "B", "T")
_CODE = {"A": 0, "B": 1, "T": 2}
_NAME = {v: k for k, v in _CODE.items()}

MAGIC = b"QTT1"

#: Default coincidence window: detector jitter is about 1 ns, use 3 sigma.
DEFAULT_WINDOW_PS = 3_000


@dataclass(frozen=True)
class TimeTagRecord:
    """One detection event: channel A/B or pump trigger T, timestamp in ps."""

    channel: str
    timestamp_ps: int

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise DataError(f"unknown channel {self.channel!r}")
        if self.timestamp_ps < 0:
            raise DataError("timestamp must be non-negative")


@dataclass(frozen=True)
class RunMeta:
    """Run descriptor carried in stream headers."""

    angles_deg: tuple[float, float] | None = None
    period_ns: float = 20_000.0
    width_ns: float = 500.0
    duration_s: float = 300.0
    seed: int | None = None
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.period_ns > self.width_ns > 0):
            raise ConfigError(
                f"need pulse_period > pulse_width > 0, got period={self.period_ns} ns, "
                f"width={self.width_ns} ns"
            )

    @property
    def period_ps(self) -> int:
        return int(round(self.period_ns * 1000))

    @property
    def width_ps(self) -> int:
        return int(round(self.width_ns * 1000))

    def header_items(self) -> list[tuple[str, str]]:
        items = []
        if self.angles_deg is not None:
            a, b = self.angles_deg
            items.append(("angles_deg", f"{_fmt(a)},{_fmt(b)}"))
        items.append(("period_ns", _fmt(self.period_ns)))
        items.append(("width_ns", _fmt(self.width_ns)))
        items.append(("duration_s", _fmt(self.duration_s)))
        if self.seed is not None:
            items.append(("seed", str(int(self.seed))))
        items.extend(sorted(self.extra.items()))
        return items


def _fmt(x: float) -> str:
    return str(int(x)) if float(x) == int(x) else repr(float(x))


def _meta_from_items(items: Mapping[str, str]) -> RunMeta:
    known = dict(items)
    angles = None
    if "angles_deg" in known:
        parts = known.pop("angles_deg").split(",")
        if len(parts) != 2:
            raise ParseError("angles_deg must be two comma-separated values")
        angles = (float(parts[0]), float(parts[1]))
    kwargs = {}
    for key, cast in (("period_ns", float), ("width_ns", float),
                      ("duration_s", float), ("seed", int)):
        if key in known:
            kwargs[key] = cast(known.pop(key))
    return RunMeta(angles_deg=angles, extra=known, **kwargs)


@dataclass(frozen=True)
class TimeTagStream:
    """A sorted stream of time tags plus its run descriptor.

    Stored column-wise: ``channels`` holds uint8 codes (0=A, 1=B, 2=T) and
    ``timestamps`` int64 picoseconds. Immutable; operations on streams are
    pure functions and safe to call concurrently.
    """

    channels: np.ndarray
    timestamps: np.ndarray
    meta: RunMeta = field(default_factory=RunMeta)

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps", ts)
        if ch.shape != ts.shape or ch.ndim != 1:
            raise UsageError("channels and timestamps must be 1-d arrays of equal length")
        if ch.size and ch.max() > 2:
            raise DataError("channel codes must be 0 (A), 1 (B) or 2 (T)")
        if ts.size and ts.min() < 0:
            raise DataError("timestamps must be non-negative")
        if ts.size > 1 and np.any(np.diff(ts) < 0):
            bad = int(np.argmax(np.diff(ts) < 0)) + 1
            raise OrderingError(f"timestamps not sorted at record {bad}")

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def records(self) -> Iterator[TimeTagRecord]:
        for c, t in zip(self.channels, self.timestamps):
            yield TimeTagRecord(_NAME[int(c)], int(t))

    def times(self, channel: str) -> np.ndarray:
        """Timestamps of one channel, in order."""
        if channel not in _CODE:
            raise UsageError(f"unknown channel {channel!r}")
        return self.timestamps[self.channels == _CODE[channel]]

    @property
    def trigger_times(self) -> np.ndarray:
        return self.times("T")


@dataclass(frozen=True)
class CoincidenceEvent:
    """One paired A/B detection."""

    t_abs: int
    pulse_index: int | None = None
    offset: int | None = None


@dataclass(frozen=True)
class Coincidences:
    """Column store of coincidence events, sorted by absolute time."""

    t_abs: np.ndarray
    pulse_index: np.ndarray | None = None
    offset: np.ndarray | None = None

    def __post_init__(self):
        t = np.ascontiguousarray(self.t_abs, dtype=np.int64)
        object.__setattr__(self, "t_abs", t)
        if t.size > 1 and np.any(np.diff(t) < 0):
            raise OrderingError("coincidence times not sorted")
        for name in ("pulse_index", "offset"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.ascontiguousarray(arr, dtype=np.int64)
                if arr.shape != t.shape:
                    raise UsageError(f"{name} must match t_abs in length")
                object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.t_abs.size)

    def __getitem__(self, i: int) -> CoincidenceEvent:
        return CoincidenceEvent(
            int(self.t_abs[i]),
            None if self.pulse_index is None else int(self.pulse_index[i]),
            None if self.offset is None else int(self.offset[i]),
        )

    def __iter__(self) -> Iterator[CoincidenceEvent]:
        for i in range(len(self)):
            yield self[i]

    @property
    def assigned(self) -> bool:
        return self.offset is not None


# ---------------------------------------------------------------------------
# stream I/O


def read_stream(source: str | bytes, format: str | None = None) -> TimeTagStream:
    """Parse a stream from CSV or binary content.

    ``format`` is "csv", "binary" or None for autodetection (binary content
    starts with the QTT1 magic).
    """
    if format is None:
        if isinstance(source, bytes) and source[:4] == MAGIC:
            format = "binary"
        else:
            format = "csv"
    if format == "csv":
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        return _read_csv(text)
    if format == "binary":
        if not isinstance(source, bytes):
            raise UsageError("binary format requires a byte sequence")
        return _read_binary(source)
    raise UsageError(f"unknown format {format!r}")


def write_stream(stream: TimeTagStream, format: str = "csv") -> bytes:
    """Serialize a stream; read_stream(write_stream(s)) round-trips exactly."""
    if format == "csv":
        return _write_csv(stream).encode("utf-8")
    if format == "binary":
        return _write_binary(stream)
    raise UsageError(f"unknown format {format!r}")


def load_stream(path) -> TimeTagStream:
    with open(path, "rb") as fh:
        return read_stream(fh.read())


def save_stream(stream: TimeTagStream, path, format: str | None = None) -> None:
    if format is None:
        format = "binary" if str(path).endswith((".qtt", ".bin")) else "csv"
    with open(path, "wb") as fh:
        fh.write(write_stream(stream, format))


def _read_csv(text: str) -> TimeTagStream:
    meta_items: dict[str, str] = {}
    codes: list[int] = []
    times: list[int] = []
    last_t = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta_items[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected '<channel>,<timestamp_ps>', got {line!r}", line=lineno)
        chan, ts_text = parts[0].strip(), parts[1].strip()
        if chan not in _CODE:
            raise ParseError(f"unknown channel {chan!r}", line=lineno)
        try:
            t = int(ts_text)
        except ValueError:
            raise ParseError(f"non-numeric timestamp {ts_text!r}", line=lineno) from None
        if t < 0:
            raise ParseError("negative timestamp", line=lineno)
        if last_t is not None and t < last_t:
            raise OrderingError(f"timestamps not sorted (line {lineno})")
        last_t = t
        codes.append(_CODE[chan])
        times.append(t)
    try:
        meta = _meta_from_items(meta_items)
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}") from None
    return TimeTagStream(np.array(codes, dtype=np.uint8),
                         np.array(times, dtype=np.int64), meta)


def _write_csv(stream: TimeTagStream) -> str:
    out = io.StringIO()
    for key, value in stream.meta.header_items():
        out.write(f"# {key}={value}\n")
    for c, t in zip(stream.channels, stream.timestamps):
        out.write(f"{_NAME[int(c)]},{int(t)}\n")
    return out.getvalue()


_REC = struct.Struct("<BQ")


def _read_binary(blob: bytes) -> TimeTagStream:
    if blob[:4] != MAGIC:
        raise ParseError("missing QTT1 magic", offset=0)
    if len(blob) < 8:
        raise ParseError("truncated header", offset=len(blob))
    (meta_len,) = struct.unpack_from("<I", blob, 4)
    body_start = 8 + meta_len
    if len(blob) < body_start:
        raise ParseError("truncated meta block", offset=len(blob))
    meta_text = blob[8:body_start].decode("utf-8")
    meta_items: dict[str, str] = {}
    for line in meta_text.splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            meta_items[key.strip()] = value.strip()
    body = blob[body_start:]
    if len(body) % _REC.size:
        raise ParseError("record block not a multiple of 9 bytes", offset=body_start + len(body))
    n = len(body) // _REC.size
    raw = np.frombuffer(body, dtype=np.dtype([("c", "u1"), ("t", "<u8")]))
    codes = raw["c"].astype(np.uint8)
    times = raw["t"].astype(np.int64)
    if codes.size and codes.max() > 2:
        bad = int(np.argmax(codes > 2))
        raise ParseError(f"unknown channel code {int(codes[bad])}",
                         offset=body_start + bad * _REC.size)
    if n > 1 and np.any(np.diff(times) < 0):
        bad = int(np.argmax(np.diff(times) < 0)) + 1
        raise OrderingError(f"timestamps not sorted at record {bad}")
    try:
        meta = _meta_from_items(meta_items)
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}") from None
    return TimeTagStream(codes, times, meta)


def _write_binary(stream: TimeTagStream) -> bytes:
    meta_text = "\n".join(f"{k}={v}" for k, v in stream.meta.header_items())
    meta_blob = meta_text.encode("utf-8")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", len(meta_blob))
    out += meta_blob
    rec = np.empty(len(stream), dtype=np.dtype([("c", "u1"), ("t", "<u8")]))
    rec["c"] = stream.channels
    rec["t"] = stream.timestamps.astype(np.uint64)
    out += rec.tobytes()
    return bytes(out)


# ---------------------------------------------------------------------------
# coincidence identification


def find_coincidences(stream: TimeTagStream, window_ps: int = DEFAULT_WINDOW_PS) -> Coincidences:
    """Pair A and B detections within ``window_ps``.

    Matching rule: among all unpaired A/B pairs with |t_A - t_B| <= window,
    repeatedly accept the pair with the smallest separation (ties: earliest,
    then A-channel order). Each detection is used at most once. The paired
    event time is the floor midpoint (t_A + t_B) // 2.
    """
    if window_ps <= 0:
        raise UsageError("window must be positive")
    is_det = stream.channels != _CODE["T"]
    det_t = stream.timestamps[is_det]
    det_c = stream.channels[is_det]
    n = det_t.size
    if n == 0:
        return Coincidences(np.empty(0, dtype=np.int64))

    # Any within-window A/B pair lies inside a maximal run of detections whose
    # consecutive gaps are <= window, so match each run independently.
    gaps = np.diff(det_t)
    boundaries = np.flatnonzero(gaps > window_ps) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    sizes = ends - starts

    out: list[np.ndarray] = []
    # fast path: runs of exactly one A and one B
    two = sizes == 2
    if np.any(two):
        s = starts[two]
        a_first = det_c[s] != det_c[s + 1]
        s = s[a_first]
        if s.size:
            t_sum = det_t[s] + det_t[s + 1]
            out.append(t_sum // 2)
    for s, e in zip(starts[sizes > 2], ends[sizes > 2]):
        out.append(_match_cluster(det_t[s:e], det_c[s:e], window_ps))
    if not out:
        return Coincidences(np.empty(0, dtype=np.int64))
    t_abs = np.concatenate(out)
    t_abs.sort()
    return Coincidences(t_abs)


def _match_cluster(times: np.ndarray, codes: np.ndarray, window_ps: int) -> np.ndarray:
    """Greedy nearest-pair matching inside one cluster (heap with lazy deletes)."""
    idx_a = np.flatnonzero(codes == _CODE["A"])
    idx_b = np.flatnonzero(codes == _CODE["B"])
    if not idx_a.size or not idx_b.size:
        return np.empty(0, dtype=np.int64)
    heap: list[tuple[int, int, int, int]] = []
    for i in idx_a:
        for j in idx_b:
            d = abs(int(times[i]) - int(times[j]))
            if d <= window_ps:
                tmin = min(int(times[i]), int(times[j]))
                heapq.heappush(heap, (d, tmin, int(i), int(j)))
    used = np.zeros(times.size, dtype=bool)
    mids: list[int] = []
    while heap:
        _, _, i, j = heapq.heappop(heap)
        if used[i] or used[j]:
            continue
        used[i] = used[j] = True
        mids.append((int(times[i]) + int(times[j])) // 2)
    return np.array(sorted(mids), dtype=np.int64)


def assign_pulses(coincidences: Coincidences, triggers: Sequence[int] | np.ndarray,
                  period_ps: int) -> Coincidences:
    """Attach pulse index and offset-from-trigger to each coincidence.

    Coincidences that precede the first trigger are dropped.
    """
    trig = np.ascontiguousarray(triggers, dtype=np.int64)
    if trig.size == 0:
        raise MissingTriggerError("no trigger timestamps to assign pulses from")
    if trig.size > 1 and np.any(np.diff(trig) < 0):
        raise OrderingError("trigger timestamps not sorted")
    if period_ps <= 0:
        raise UsageError("period must be positive")
    t = coincidences.t_abs
    keep = t >= trig[0]
    t = t[keep]
    idx = np.searchsorted(trig, t, side="right") - 1
    offset = t - trig[idx]
    return Coincidences(t, pulse_index=idx, offset=offset)


# ---------------------------------------------------------------------------
# stroboscopic folding and run statistics

QUANTITIES = ("singles_A", "singles_B", "coincidences", "efficiency", "s_parameter")


@dataclass(frozen=True)
class Histogram:
    """Per-bin values of a quantity folded modulo the pulse period."""

    edges_ps: np.ndarray
    values: np.ndarray
    quantity: str
    partial_final_bin: bool = False

    @property
    def centers_ps(self) -> np.ndarray:
        return (self.edges_ps[:-1] + self.edges_ps[1:]) / 2.0

    @property
    def total(self) -> float:
        return float(np.sum(self.values))


def _bin_edges(period_ps: int, bin_width_ps: int) -> tuple[np.ndarray, bool]:
    n_bins, rem = divmod(period_ps, bin_width_ps)
    partial = rem != 0
    edges = np.arange(0, n_bins * bin_width_ps + 1, bin_width_ps, dtype=np.int64)
    if partial:
        edges = np.append(edges, period_ps)
    return edges, partial


def _fold_counts(times_mod: np.ndarray, edges: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(times_mod, bins=edges)
    return counts.astype(np.float64)


def _folded(stream_or_coinc, period_ps: int, what: str) -> np.ndarray:
    if what in ("singles_A", "singles_B"):
        chan = "A" if what.endswith("A") else "B"
        return np.mod(stream_or_coinc.times(chan), period_ps)
    # coincidences: prefer assigned offsets (jitter-referenced), else fold t_abs
    if stream_or_coinc.assigned:
        return np.mod(stream_or_coinc.offset, period_ps)
    return np.mod(stream_or_coinc.t_abs, period_ps)


def stroboscope(period_ps: int, bin_width_ps: int, quantity: str, *,
                stream: TimeTagStream | None = None,
                coincidences: Coincidences | None = None,
                runs: Sequence[tuple[TimeTagStream, Coincidences]] | None = None,
                chsh_runs: Mapping[tuple[int, int, int, int], Coincidences] | None = None,
                ) -> Histogram:
    """Fold a quantity modulo the pulse period.

    ``singles_A``/``singles_B`` need ``stream``; ``coincidences`` needs
    ``coincidences``; ``efficiency`` needs ``runs`` (one (stream, coincidences)
    pair per setting, averaged over settings); ``s_parameter`` needs
    ``chsh_runs`` keyed by (x, y, rot_a, rot_b) with x/y in {0,1} selecting
    a/a' and b/b' and rot flags marking the 90-degree rotated runs.
    """
    if quantity not in QUANTITIES:
        raise UsageError(f"unknown quantity {quantity!r}")
    if period_ps <= 0 or bin_width_ps <= 0 or bin_width_ps > period_ps:
        raise UsageError("need 0 < bin_width <= period")
    edges, partial = _bin_edges(period_ps, bin_width_ps)

    if quantity in ("singles_A", "singles_B"):
        if stream is None:
            raise ConfigError(f"{quantity} requires stream=")
        vals = _fold_counts(_folded(stream, period_ps, quantity), edges)
        return Histogram(edges, vals, quantity, partial)

    if quantity == "coincidences":
        if coincidences is None:
            return Histogram(edges, np.zeros(edges.size - 1), quantity, partial)
        vals = _fold_counts(_folded(coincidences, period_ps, quantity), edges)
        return Histogram(edges, vals, quantity, partial)

    if quantity == "efficiency":
        if not runs:
            raise ConfigError("efficiency requires runs=[(stream, coincidences), ...]")
        per_run = []
        for st, co in runs:
            singles = (_fold_counts(np.mod(st.times("A"), period_ps), edges)
                       + _fold_counts(np.mod(st.times("B"), period_ps), edges))
            coinc = _fold_counts(_folded(co, period_ps, "coincidences"), edges)
            with np.errstate(divide="ignore", invalid="ignore"):
                per_run.append(np.where(singles > 0, 2.0 * coinc / singles, np.nan))
        stacked = np.vstack(per_run)
        counts = np.sum(~np.isnan(stacked), axis=0)
        vals = np.where(counts > 0, np.nansum(stacked, axis=0) / np.maximum(counts, 1),
                        np.nan)  # bins with no singles in any run stay undefined
        return Histogram(edges, vals, quantity, partial)

    # s_parameter
    if not chsh_runs:
        raise ConfigError("s_parameter requires chsh_runs= keyed by (x, y, rot_a, rot_b)")
    needed = {(x, y, ra, rb) for x in (0, 1) for y in (0, 1) for ra in (0, 1) for rb in (0, 1)}
    missing = needed - set(chsh_runs)
    if missing:
        raise ConfigError(f"s_parameter needs all 16 settings, missing {sorted(missing)}")
    counts = {key: _fold_counts(_folded(co, period_ps, "coincidences"), edges)
              for key, co in chsh_runs.items()}
    e = {}
    for x in (0, 1):
        for y in (0, 1):
            npp = counts[(x, y, 0, 0)]
            npm = counts[(x, y, 0, 1)]
            nmp = counts[(x, y, 1, 0)]
            nmm = counts[(x, y, 1, 1)]
            tot = npp + npm + nmp + nmm
            with np.errstate(divide="ignore", invalid="ignore"):
                e[(x, y)] = np.where(tot > 0, (npp - npm - nmp + nmm) / tot, np.nan)
    s = np.abs(e[(0, 0)] - e[(0, 1)] + e[(1, 0)] + e[(1, 1)])
    return Histogram(edges, s, "s_parameter", partial)


@dataclass(frozen=True)
class RunStatistics:
    singles_a: int
    singles_b: int
    n_coincidences: int
    n_pulses: int
    photons_per_pulse: float
    efficiency: float


def run_statistics(stream: TimeTagStream, coincidences: Coincidences) -> RunStatistics:
    """Headline counts of a run.

    photons_per_pulse = (singles_A + singles_B) / (2 n_pulses);
    efficiency = 2 n_coinc / (singles_A + singles_B).
    """
    singles_a = int(np.count_nonzero(stream.channels == _CODE["A"]))
    singles_b = int(np.count_nonzero(stream.channels == _CODE["B"]))
    n_trig = int(np.count_nonzero(stream.channels == _CODE["T"]))
    if n_trig:
        n_pulses = n_trig
    else:
        n_pulses = int(stream.meta.duration_s * 1e12 // stream.meta.period_ps)
    if n_pulses <= 0:
        raise DataError("invalid run: zero pulses")
    singles = singles_a + singles_b
    eff = 2.0 * len(coincidences) / singles if singles else 0.0
    return RunStatistics(
        singles_a=singles_a,
        singles_b=singles_b,
        n_coincidences=len(coincidences),
        n_pulses=n_pulses,
        photons_per_pulse=singles / (2.0 * n_pulses),
        efficiency=eff,
    )
