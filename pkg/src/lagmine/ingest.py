"""Dataset loading: tabular CSV files and span-style trace exports.

The CSV format is one row per request with a required ``Latency`` column, an
optional ``ADC`` ground-truth column, and every other column holding the
cumulative execution time (ms) of one RPC.  Span exports are flattened to
the same shape: one row per trace, per-RPC durations summed over repeated
invocations, latency taken from the root span.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, ParseError, TraceStructureError
from .model import NO_LABEL, Dataset

LATENCY_COLUMN = "Latency"
LABEL_COLUMN = "ADC"

SloSpec = Union[float, str]  # a threshold in ms, or "auto"


@dataclass(frozen=True)
class SpanRecord:
    """One span of a distributed trace; durations are microseconds."""

    trace_id: str
    span_id: str
    parent_id: Optional[str]
    operation: str
    duration_us: int


def _resolve_slo(slo: SloSpec, latencies: np.ndarray, labels: Optional[Sequence[str]]) -> float:
    if slo == "auto":
        if labels is None:
            raise ConfigError("slo='auto' requires a ground-truth label column")
        labeled = latencies[[lab != NO_LABEL for lab in labels]]
        if len(labeled) == 0:
            raise ConfigError("slo='auto' requires at least one labeled request")
        # one ulp below the smallest labeled latency, so labeled rows are positives
        return float(np.nextafter(labeled.min(), -np.inf))
    return float(slo)


def load_csv(path: Union[str, Path], slo: SloSpec) -> Dataset:
    """Load the tabular request format; see the module docstring for shape."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if LATENCY_COLUMN not in header:
            raise ParseError(f"{path}: missing required column {LATENCY_COLUMN!r}")
        latency_col = header.index(LATENCY_COLUMN)
        label_col = header.index(LABEL_COLUMN) if LABEL_COLUMN in header else None
        rpc_cols = [
            i for i in range(len(header)) if i not in (latency_col, label_col)
        ]
        schema = tuple(header[i] for i in rpc_cols)

        rows: list[list[float]] = []
        latencies: list[float] = []
        labels: list[str] = []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}:{row_no}: expected {len(header)} cells, got {len(row)}")

            def cell(i: int) -> float:
                try:
                    value = float(row[i])
                except ValueError:
                    raise ParseError(
                        f"{path}:{row_no}: column {header[i]!r}: not a number: {row[i]!r}"
                    ) from None
                if value < 0:
                    raise ParseError(
                        f"{path}:{row_no}: column {header[i]!r}: negative value {value}"
                    )
                return value

            rows.append([cell(i) for i in rpc_cols])
            latencies.append(cell(latency_col))
            if label_col is not None:
                labels.append(row[label_col].strip() or NO_LABEL)

    if not rows:
        raise ParseError(f"{path}: no data rows")
    latency_arr = np.asarray(latencies, dtype=np.float64)
    label_tuple = tuple(labels) if label_col is not None else None
    return Dataset(
        schema=schema,
        exec_times=np.asarray(rows, dtype=np.float64),
        latencies=latency_arr,
        slo=_resolve_slo(slo, latency_arr, label_tuple),
        labels=label_tuple,
    )


def write_csv(dataset: Dataset, path: Union[str, Path]) -> None:
    """Write the dataset back out; times are formatted to 3 decimal places."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(dataset.schema) + [LATENCY_COLUMN]
        if dataset.labels is not None:
            header.append(LABEL_COLUMN)
        writer.writerow(header)
        for i in range(dataset.n_requests):
            row = [f"{v:.3f}" for v in dataset.exec_times[i]]
            row.append(f"{dataset.latencies[i]:.3f}")
            if dataset.labels is not None:
                row.append(dataset.labels[i])
            writer.writerow(row)


def flatten_spans(spans: Iterable[SpanRecord]) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    """One row per trace: (schema, exec-time matrix in ms, latencies in ms).

    The root span defines the request latency and never becomes a column;
    non-root spans sum into their operation's column.  Cumulative time may
    exceed latency (asynchronous children) and is accepted as-is.
    """
    traces: dict[str, list[SpanRecord]] = {}
    for span in spans:
        if span.duration_us < 0:
            raise ParseError(f"span {span.span_id}: negative duration")
        traces.setdefault(span.trace_id, []).append(span)
    if not traces:
        raise ParseError("no spans to flatten")

    schema: list[str] = []
    seen: set[str] = set()
    rows: list[dict[str, float]] = []
    latencies: list[float] = []
    for trace_id, members in traces.items():
        ids = {s.span_id for s in members}
        roots = [s for s in members if s.parent_id is None]
        if len(roots) == 0:
            raise TraceStructureError(f"trace {trace_id}: no root span")
        if len(roots) > 1:
            raise TraceStructureError(f"trace {trace_id}: multiple root spans")
        for s in members:
            if s.parent_id is not None and s.parent_id not in ids:
                raise TraceStructureError(
                    f"trace {trace_id}: span {s.span_id} references unknown parent {s.parent_id}"
                )
        row: dict[str, float] = {}
        for s in members:
            if s is roots[0]:
                continue
            row[s.operation] = row.get(s.operation, 0.0) + s.duration_us / 1000.0
            if s.operation not in seen:
                seen.add(s.operation)
                schema.append(s.operation)
        rows.append(row)
        latencies.append(roots[0].duration_us / 1000.0)

    matrix = np.zeros((len(rows), len(schema)), dtype=np.float64)
    index = {name: j for j, name in enumerate(schema)}
    for i, row in enumerate(rows):
        for name, value in row.items():
            matrix[i, index[name]] = value
    return tuple(schema), matrix, np.asarray(latencies, dtype=np.float64)


def parse_span_json(data) -> list[SpanRecord]:
    """Parse the minimal span export shape documented in the README.

    Each record: ``{"traceID", "spanID", "operationName", "duration",
    "references": [{"refType", "spanID"}]}`` with duration in microseconds.
    The parent is the first CHILD_OF reference (or the first reference when
    none is marked).
    """
    spans = []
    for i, obj in enumerate(data):
        try:
            refs = obj.get("references", [])
            parent = None
            for ref in refs:
                if ref.get("refType") == "CHILD_OF":
                    parent = ref["spanID"]
                    break
            if parent is None and refs:
                parent = refs[0]["spanID"]
            spans.append(
                SpanRecord(
                    trace_id=obj["traceID"],
                    span_id=obj["spanID"],
                    parent_id=parent,
                    operation=obj["operationName"],
                    duration_us=int(obj["duration"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"span record {i}: {exc!r}") from None
    return spans


def load_spans(path: Union[str, Path], slo: SloSpec) -> Dataset:
    """Load a span-export JSON file and flatten it into a Dataset."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ParseError(f"{path}: expected a JSON array of spans")
    schema, matrix, latencies = flatten_spans(parse_span_json(data))
    return Dataset(
        schema=schema,
        exec_times=matrix,
        latencies=latencies,
        slo=_resolve_slo(slo, latencies, None),
        labels=None,
    )
