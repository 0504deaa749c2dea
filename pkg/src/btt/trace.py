"""Trial trace data model and the line-delimited on-disk format.

One trial writes one UTF-8 JSON-Lines file named ``<trial_id>.trace.jsonl``.
Record kinds: ``meta`` (first), ``epoch`` and ``layer`` interleaved by epoch,
and an optional ``final``. Non-finite numbers are serialized as the strings
"NaN", "Infinity" and "-Infinity" so files stay valid JSON. Byte output is
deterministic for a given trace; a single writer appends per trial while
readers may tail concurrently (a truncated last line is tolerated and its
byte offset reported back for resuming).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, BinaryIO, Iterable

from .errors import InvalidInput, InvariantViolation, ParseError, TraceIOError
from .stats import StatVector, _feq

VAR_KINDS = ("grad", "weight", "act")
METRIC_MODES = ("maximize", "minimize")
FINAL_STATUSES = ("completed", "terminated", "failed")

_KIND_RANK = {k: i for i, k in enumerate(VAR_KINDS)}


@dataclass(frozen=True)
class TraceMeta:
    trial_id: str
    config: dict[str, Any]
    max_epoch: int
    created_unix_ms: int


@dataclass(frozen=True, eq=False)
class EpochRecord:
    trial_id: str
    epoch: int
    train_loss: float
    val_metric: float
    metric_mode: str
    wall_ms: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EpochRecord):
            return NotImplemented
        return (
            self.trial_id == other.trial_id
            and self.epoch == other.epoch
            and _feq(self.train_loss, other.train_loss)
            and _feq(self.val_metric, other.val_metric)
            and self.metric_mode == other.metric_mode
            and self.wall_ms == other.wall_ms
        )

    def __hash__(self) -> int:
        return hash((self.trial_id, self.epoch, self.wall_ms))


@dataclass(frozen=True)
class LayerRecord:
    trial_id: str
    epoch: int
    layer_index: int
    layer_name: str
    var_kind: str
    stats: StatVector


@dataclass(frozen=True, eq=False)
class TraceFinal:
    status: str
    reason: str
    best_val_metric: float
    epochs_run: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceFinal):
            return NotImplemented
        return (
            self.status == other.status
            and self.reason == other.reason
            and _feq(self.best_val_metric, other.best_val_metric)
            and self.epochs_run == other.epochs_run
        )

    def __hash__(self) -> int:
        return hash((self.status, self.reason, self.epochs_run))


@dataclass
class TrialTrace:
    meta: TraceMeta
    epochs: list[EpochRecord] = field(default_factory=list)
    layers: list[LayerRecord] = field(default_factory=list)
    final: TraceFinal | None = None

    def train_losses(self, upto_epoch: int | None = None) -> list[float]:
        recs = self.epochs if upto_epoch is None else self.epochs[: upto_epoch + 1]
        return [r.train_loss for r in recs]

    def layer_stats(self, epoch: int, var_kind: str) -> list[StatVector]:
        """StatVectors of one kind at one epoch, ordered by layer_index."""
        recs = [l for l in self.layers if l.epoch == epoch and l.var_kind == var_kind]
        recs.sort(key=lambda l: l.layer_index)
        return [l.stats for l in recs]

    def best_val_metric(self) -> float:
        if not self.epochs:
            return float("nan")
        vals = [r.val_metric for r in self.epochs]
        if any(math.isnan(v) for v in vals):
            finite = [v for v in vals if not math.isnan(v)]
            if not finite:
                return float("nan")
            vals = finite
        mode = self.epochs[0].metric_mode
        return max(vals) if mode == "maximize" else min(vals)

    def validate(self) -> None:
        """Raise InvariantViolation when a documented invariant is broken."""
        for i, rec in enumerate(self.epochs):
            if rec.epoch != i:
                raise InvariantViolation(
                    f"epoch records must be gapless from 0; found epoch {rec.epoch} at position {i}"
                )
            if rec.trial_id != self.meta.trial_id:
                raise InvariantViolation(
                    f"epoch record trial_id {rec.trial_id!r} != meta trial_id {self.meta.trial_id!r}"
                )
            if rec.metric_mode not in METRIC_MODES:
                raise InvariantViolation(f"bad metric_mode {rec.metric_mode!r}")
            if i > 0 and rec.wall_ms < self.epochs[i - 1].wall_ms:
                raise InvariantViolation(f"wall_ms decreases at epoch {rec.epoch}")
        seen: dict[tuple[int, str], int] = {}
        for lay in self.layers:
            if lay.trial_id != self.meta.trial_id:
                raise InvariantViolation(
                    f"layer record trial_id {lay.trial_id!r} != meta trial_id {self.meta.trial_id!r}"
                )
            if lay.var_kind not in VAR_KINDS:
                raise InvariantViolation(f"bad var_kind {lay.var_kind!r}")
            if lay.layer_index < 0 or lay.epoch < 0:
                raise InvariantViolation("negative layer_index or epoch")
            key = (lay.epoch, lay.var_kind)
            prev = seen.get(key)
            if prev is not None and lay.layer_index <= prev:
                raise InvariantViolation(
                    f"layer_index not strictly increasing in epoch {lay.epoch} kind {lay.var_kind}"
                )
            seen[key] = lay.layer_index
        if self.final is not None:
            if self.final.status not in FINAL_STATUSES:
                raise InvariantViolation(f"bad final status {self.final.status!r}")
            if self.final.epochs_run != len(self.epochs):
                raise InvariantViolation(
                    f"final.epochs_run {self.final.epochs_run} != recorded epochs {len(self.epochs)}"
                )
            if self.epochs and not _feq(self.final.best_val_metric, self.best_val_metric()):
                raise InvariantViolation("final.best_val_metric does not match the extremum")

    def canonical(self) -> "TrialTrace":
        """Copy with layers in serialization order (epoch, kind rank, index)."""
        layers = sorted(
            self.layers, key=lambda l: (l.epoch, _KIND_RANK[l.var_kind], l.layer_index)
        )
        return replace(self, layers=layers)


# ---------------------------------------------------------------------------
# number encoding: non-finite floats travel as strings


def enc_num(x: float | int):
    if isinstance(x, float):
        if math.isnan(x):
            return "NaN"
        if x == math.inf:
            return "Infinity"
        if x == -math.inf:
            return "-Infinity"
    return x


def dec_num(v) -> float:
    if isinstance(v, str):
        try:
            return {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}[v]
        except KeyError:
            raise ParseError(f"not a number: {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"not a number: {v!r}")
    return float(v)


def _enc_value(v):
    """Encode a config value (scalars only; non-finite floats as strings)."""
    if isinstance(v, (int, float)):
        return enc_num(v)
    return v


def _dec_value(v):
    if v in ("NaN", "Infinity", "-Infinity"):
        return dec_num(v)
    return v


# ---------------------------------------------------------------------------
# line encoding


def meta_line(meta: TraceMeta) -> str:
    obj = {
        "kind": "meta",
        "trial_id": meta.trial_id,
        "config": {k: _enc_value(meta.config[k]) for k in sorted(meta.config)},
        "max_epoch": meta.max_epoch,
        "created_unix_ms": meta.created_unix_ms,
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def epoch_line(rec: EpochRecord) -> str:
    obj = {
        "kind": "epoch",
        "trial_id": rec.trial_id,
        "epoch": rec.epoch,
        "train_loss": enc_num(rec.train_loss),
        "val_metric": enc_num(rec.val_metric),
        "metric_mode": rec.metric_mode,
        "wall_ms": rec.wall_ms,
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def layer_line(rec: LayerRecord) -> str:
    obj = {
        "kind": "layer",
        "trial_id": rec.trial_id,
        "epoch": rec.epoch,
        "layer_index": rec.layer_index,
        "layer_name": rec.layer_name,
        "var": rec.var_kind,
        "stats": [enc_num(v) for v in rec.stats.as_tuple()],
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def final_line(trial_id: str, fin: TraceFinal) -> str:
    obj = {
        "kind": "final",
        "trial_id": trial_id,
        "status": fin.status,
        "reason": fin.reason,
        "best_val_metric": enc_num(fin.best_val_metric),
        "epochs_run": fin.epochs_run,
    }
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_trace(trace: TrialTrace, sink: BinaryIO) -> int:
    """Serialize a whole trace; returns the byte count written.

    Record order is meta, then epoch/layer records interleaved by epoch,
    then final. Output bytes are deterministic for a given trace.
    """
    trace = trace.canonical()
    trace.validate()
    lines = [meta_line(trace.meta)]
    layers_by_epoch: dict[int, list[LayerRecord]] = {}
    for lay in trace.layers:
        layers_by_epoch.setdefault(lay.epoch, []).append(lay)
    for rec in trace.epochs:
        lines.append(epoch_line(rec))
        for lay in layers_by_epoch.pop(rec.epoch, []):
            lines.append(layer_line(lay))
    # layers for epochs without an epoch record (unusual, but preserved)
    for epoch in sorted(layers_by_epoch):
        for lay in layers_by_epoch[epoch]:
            lines.append(layer_line(lay))
    if trace.final is not None:
        lines.append(final_line(trace.meta.trial_id, trace.final))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    try:
        sink.write(data)
    except OSError as exc:
        raise TraceIOError(f"trace sink failed: {exc}") from exc
    return len(data)


def trace_to_bytes(trace: TrialTrace) -> bytes:
    buf = io.BytesIO()
    write_trace(trace, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# parsing


_META_FIELDS = {"kind", "trial_id", "config", "max_epoch", "created_unix_ms"}
_EPOCH_FIELDS = {"kind", "trial_id", "epoch", "train_loss", "val_metric", "metric_mode", "wall_ms"}
_LAYER_FIELDS = {"kind", "trial_id", "epoch", "layer_index", "layer_name", "var", "stats"}
_FINAL_FIELDS = {"kind", "trial_id", "status", "reason", "best_val_metric", "epochs_run"}


def _require_fields(obj: dict, required: set[str], line_no: int) -> None:
    missing = required - obj.keys()
    if missing:
        raise ParseError(f"missing fields {sorted(missing)}", line_no)


def _int_field(obj: dict, name: str, line_no: int) -> int:
    v = obj.get(name)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"field {name!r} must be an integer, got {v!r}", line_no)
    return v


def parse_record_line(line: str, line_no: int):
    """Parse one JSONL record into its dataclass; raises ParseError."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", line_no) from None
    if not isinstance(obj, dict):
        raise ParseError("record is not a JSON object", line_no)
    kind = obj.get("kind")
    if kind == "meta":
        _require_fields(obj, _META_FIELDS, line_no)
        config = obj["config"]
        if not isinstance(config, dict):
            raise ParseError("config must be an object", line_no)
        return TraceMeta(
            trial_id=str(obj["trial_id"]),
            config={k: _dec_value(v) for k, v in config.items()},
            max_epoch=_int_field(obj, "max_epoch", line_no),
            created_unix_ms=_int_field(obj, "created_unix_ms", line_no),
        )
    if kind == "epoch":
        _require_fields(obj, _EPOCH_FIELDS, line_no)
        mode = obj["metric_mode"]
        if mode not in METRIC_MODES:
            raise ParseError(f"bad metric_mode {mode!r}", line_no)
        try:
            return EpochRecord(
                trial_id=str(obj["trial_id"]),
                epoch=_int_field(obj, "epoch", line_no),
                train_loss=dec_num(obj["train_loss"]),
                val_metric=dec_num(obj["val_metric"]),
                metric_mode=mode,
                wall_ms=_int_field(obj, "wall_ms", line_no),
            )
        except ParseError as exc:
            raise ParseError(str(exc), line_no) from None
    if kind == "layer":
        _require_fields(obj, _LAYER_FIELDS, line_no)
        var_kind = obj["var"]
        if var_kind not in VAR_KINDS:
            raise ParseError(f"bad var kind {var_kind!r}", line_no)
        stats = obj["stats"]
        if not isinstance(stats, list) or len(stats) != 10:
            raise ParseError("stats must be an array of 10 numbers", line_no)
        try:
            vec = StatVector.from_tuple([dec_num(v) for v in stats])
        except ParseError as exc:
            raise ParseError(str(exc), line_no) from None
        return LayerRecord(
            trial_id=str(obj["trial_id"]),
            epoch=_int_field(obj, "epoch", line_no),
            layer_index=_int_field(obj, "layer_index", line_no),
            layer_name=str(obj["layer_name"]),
            var_kind=var_kind,
            stats=vec,
        )
    if kind == "final":
        _require_fields(obj, _FINAL_FIELDS, line_no)
        status = obj["status"]
        if status not in FINAL_STATUSES:
            raise ParseError(f"bad final status {status!r}", line_no)
        try:
            return TraceFinal(
                status=status,
                reason=str(obj["reason"]),
                best_val_metric=dec_num(obj["best_val_metric"]),
                epochs_run=_int_field(obj, "epochs_run", line_no),
            )
        except ParseError as exc:
            raise ParseError(str(exc), line_no) from None
    raise ParseError(f"unknown record kind {kind!r}", line_no)


@dataclass
class TraceReadResult:
    trace: TrialTrace
    resume_offset: int
    truncated_tail: bool


def read_trace_stream(source: BinaryIO) -> TraceReadResult:
    """Parse a trace stream, tolerating a truncated (in-flight) last line.

    Records may arrive in any order within an epoch; the assembled trace is
    validated against the trace invariants. ``resume_offset`` is the byte
    offset just past the last complete line, for tailing readers.
    """
    try:
        data = source.read()
    except OSError as exc:
        raise TraceIOError(f"trace source failed: {exc}") from exc
    text = data.decode("utf-8", errors="replace")
    offset = 0
    truncated = False
    meta: TraceMeta | None = None
    epochs: list[EpochRecord] = []
    layers: list[LayerRecord] = []
    final: TraceFinal | None = None
    line_no = 0
    for raw in text.splitlines(keepends=True):
        if not raw.endswith("\n"):
            truncated = True
            break
        line_no += 1
        line = raw.rstrip("\n")
        offset += len(raw.encode("utf-8"))
        if not line.strip():
            continue
        rec = parse_record_line(line, line_no)
        if isinstance(rec, TraceMeta):
            if meta is not None:
                raise ParseError("duplicate meta record", line_no)
            meta = rec
        elif isinstance(rec, EpochRecord):
            epochs.append(rec)
        elif isinstance(rec, LayerRecord):
            layers.append(rec)
        else:
            if final is not None:
                raise ParseError("duplicate final record", line_no)
            final = rec
    if meta is None:
        raise ParseError("trace has no meta record", 1)
    epochs.sort(key=lambda r: r.epoch)
    trace = TrialTrace(meta=meta, epochs=epochs, layers=layers, final=final).canonical()
    trace.validate()
    return TraceReadResult(trace=trace, resume_offset=offset, truncated_tail=truncated)


def read_trace(source: BinaryIO) -> TrialTrace:
    return read_trace_stream(source).trace


def read_trace_file(path) -> TrialTrace:
    with open(path, "rb") as fh:
        return read_trace(fh)


class TraceWriter:
    """Streaming single-writer for one trial's trace file.

    Appends one line per record and flushes, so concurrent tailers see
    complete lines plus at most one truncated tail.
    """

    def __init__(self, path, meta: TraceMeta):
        self._fh = open(path, "wb")
        self._closed = False
        self.trial_id = meta.trial_id
        self._write_line(meta_line(meta))

    def _write_line(self, line: str) -> None:
        try:
            self._fh.write(line.encode("utf-8") + b"\n")
            self._fh.flush()
        except OSError as exc:
            raise TraceIOError(f"trace sink failed: {exc}") from exc

    def write_epoch(self, rec: EpochRecord, layers: Iterable[LayerRecord] = ()) -> None:
        self._write_line(epoch_line(rec))
        ordered = sorted(layers, key=lambda l: (_KIND_RANK[l.var_kind], l.layer_index))
        for lay in ordered:
            self._write_line(layer_line(lay))

    def write_final(self, fin: TraceFinal) -> None:
        self._write_line(final_line(self.trial_id, fin))

    def close(self) -> None:
        if not self._closed:
            self._fh.close()
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
