"""Reading and writing run logs and constants documents.

Run logs are a single JSON header line followed by one row per logged
sample, either JSON objects (the default) or bare comma-separated
values when the header declares format=csv. Constants documents are a
single JSON object. Counts are serialized in plain decimal; fitted
constants in scientific notation with enough digits to round-trip
bit-identically. File writes go through a temp file and rename, so a
reader never sees a half-written file.
"""

from __future__ import annotations

import json
import math
import os
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatVersionError, ParseError, ValidationError
from .fitting import FitReport
from .laws import ScalingConstants
from .records import (
    SPLITS,
    RunRecord,
    TrajectorySample,
    WarmupTrim,
    downsample_run,
    ema_smooth,
    sort_samples,
    trim_warmup,
)

SCHEMA_VERSION = 1
RUN_FORMATS = ("jsonl", "csv")
_HEADER_FIELDS = ("run_id", "n_params", "batch_tokens", "context_length", "dataset_tag")
_ROW_FIELDS = ("step", "tokens", "loss", "split")
_CONSTANT_FIELDS = ("n_c", "alpha_n", "s_c", "alpha_s", "b_star", "alpha_b")


# ---------------------------------------------------------------------------
# path/stream plumbing
# ---------------------------------------------------------------------------


@contextmanager
def _open_out(target):
    """Yield a text stream for a path, '-', or an open file-like object.

    Paths are written atomically: content lands in a temp file in the
    same directory and is renamed over the target only on success.
    """
    if hasattr(target, "write"):
        yield target
        return
    if target == "-":
        yield sys.stdout
        return
    path = Path(target)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            yield handle
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


@contextmanager
def _open_in(source):
    if hasattr(source, "read"):
        yield source
        return
    if source == "-":
        yield sys.stdin
        return
    with open(source, "r", encoding="utf-8") as handle:
        yield handle


def _decimal(value: float):
    """Counts go to JSON as plain integers whenever they are integral."""
    value = float(value)
    return int(value) if value.is_integer() and abs(value) < 2**63 else value


# ---------------------------------------------------------------------------
# run logs
# ---------------------------------------------------------------------------


def write_run_log(run: RunRecord, target, fmt: str = "jsonl") -> None:
    """Serialize a run, header line first, one sample per row after.

    Args:
        run: the run to write.
        target: path, '-' for stdout, or an open text stream.
        fmt: 'jsonl' rows (objects) or 'csv' rows (step,tokens,loss,split).
    """
    if fmt not in RUN_FORMATS:
        raise ValidationError(f"unknown run-log format {fmt!r}")
    header = {
        "schema_version": SCHEMA_VERSION,
        "format": fmt,
        "run_id": run.run_id,
        "n_params": _decimal(run.n_params),
        "batch_tokens": _decimal(run.batch_tokens),
        "context_length": _decimal(run.context_length),
        "dataset_tag": run.dataset_tag,
    }
    with _open_out(target) as out:
        out.write(json.dumps(header) + "\n")
        for s in sort_samples(run.samples):
            if fmt == "jsonl":
                row = {
                    "step": _decimal(s.step),
                    "tokens": _decimal(s.tokens),
                    "loss": float(s.loss),
                    "split": s.split,
                }
                out.write(json.dumps(row) + "\n")
            else:
                out.write(f"{_decimal(s.step)},{_decimal(s.tokens)},{float(s.loss)!r},{s.split}\n")


def _parse_row_jsonl(text: str, line_no: int) -> TrajectorySample:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"bad JSON row: {e.msg}", line=line_no) from None
    if not isinstance(obj, dict):
        raise ParseError(f"row must be an object, got {type(obj).__name__}", line=line_no)
    missing = [k for k in _ROW_FIELDS if k not in obj]
    if missing:
        raise ParseError(f"row missing fields {missing}", line=line_no)
    return _build_sample(obj["step"], obj["tokens"], obj["loss"], obj["split"], line_no)


def _parse_row_csv(text: str, line_no: int) -> TrajectorySample:
    parts = text.split(",")
    if len(parts) != len(_ROW_FIELDS):
        raise ParseError(
            f"expected {len(_ROW_FIELDS)} comma-separated values, got {len(parts)}",
            line=line_no,
        )
    return _build_sample(parts[0], parts[1], parts[2], parts[3].strip(), line_no)


def _build_sample(step, tokens, loss, split, line_no: int) -> TrajectorySample:
    try:
        step = float(step)
        tokens = float(tokens)
        loss = float(loss)
    except (TypeError, ValueError):
        raise ParseError("step, tokens, and loss must be numbers", line=line_no) from None
    if split not in SPLITS:
        raise ParseError(f"unknown split {split!r}", line=line_no)
    if not (math.isfinite(step) and step > 0):
        raise ValidationError(f"line {line_no}: step must be positive, got {step!r}")
    if not (math.isfinite(loss) and loss > 0):
        raise ValidationError(f"line {line_no}: loss must be positive, got {loss!r}")
    if not (math.isfinite(tokens) and tokens > 0):
        raise ValidationError(f"line {line_no}: tokens must be positive, got {tokens!r}")
    return TrajectorySample(step, tokens, loss, split)


def read_run_log(source) -> RunRecord:
    """Parse and validate one run log.

    Rows must be strictly increasing in step within each split; the
    returned record's samples are in canonical (step, split) order.

    Args:
        source: path, '-' for stdin, or an open text stream.

    Raises:
        ParseError: malformed header or row, with the 1-based line.
        FormatVersionError: unknown schema version.
        ValidationError: structurally valid rows that break run
            invariants (decreasing or duplicate steps, bad values,
            token/step inconsistency).
    """
    with _open_in(source) as handle:
        header_text = handle.readline()
        if not header_text.strip():
            raise ParseError("empty file, expected a header line", line=1)
        try:
            header = json.loads(header_text)
        except json.JSONDecodeError as e:
            raise ParseError(f"bad JSON header: {e.msg}", line=1) from None
        if not isinstance(header, dict):
            raise ParseError("header must be a JSON object", line=1)
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise FormatVersionError(f"unsupported schema version {version!r}", line=1)
        missing = [k for k in _HEADER_FIELDS if k not in header]
        if missing:
            raise ParseError(f"header missing fields {missing}", line=1)
        fmt = header.get("format", "jsonl")
        if fmt not in RUN_FORMATS:
            raise ParseError(f"unknown run-log format {fmt!r}", line=1)
        parse_row = _parse_row_jsonl if fmt == "jsonl" else _parse_row_csv

        samples = []
        last_step: dict[str, tuple[float, int]] = {}
        for line_no, text in enumerate(handle, start=2):
            if not text.strip():
                continue
            sample = parse_row(text, line_no)
            prev = last_step.get(sample.split)
            if prev is not None:
                prev_step, prev_line = prev
                if sample.step == prev_step:
                    raise ValidationError(
                        f"line {line_no}: duplicate step {sample.step!r} in split "
                        f"{sample.split!r} (also line {prev_line})"
                    )
                if sample.step < prev_step:
                    raise ValidationError(
                        f"line {line_no}: decreasing step {sample.step!r} in split "
                        f"{sample.split!r} after {prev_step!r} (line {prev_line})"
                    )
            last_step[sample.split] = (sample.step, line_no)
            samples.append(sample)

    if not samples:
        raise ValidationError(f"run {header['run_id']!r} has no sample rows")
    try:
        return RunRecord(
            run_id=str(header["run_id"]),
            n_params=float(header["n_params"]),
            batch_tokens=float(header["batch_tokens"]),
            context_length=int(header["context_length"]),
            dataset_tag=str(header["dataset_tag"]),
            samples=sort_samples(samples),
        )
    except (TypeError, ValueError) as e:
        if isinstance(e, ValidationError):
            raise
        raise ParseError(f"bad header field: {e}", line=1) from None


# ---------------------------------------------------------------------------
# constants documents
# ---------------------------------------------------------------------------


@dataclass
class ConstantsDocument:
    """Serializable form of fitted constants plus provenance.

    b_star and alpha_b are None for partial fits (no batch scan).
    """

    n_c: float
    alpha_n: float
    s_c: float
    alpha_s: float
    b_star: float | None
    alpha_b: float | None
    meta: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def complete(self) -> bool:
        return self.b_star is not None and self.alpha_b is not None

    def constants(self) -> ScalingConstants:
        """The document as ScalingConstants; requires a complete fit."""
        if not self.complete():
            raise ValidationError("document holds a partial fit, no batch law")
        return ScalingConstants(
            n_c=self.n_c, alpha_n=self.alpha_n,
            s_c=self.s_c, alpha_s=self.alpha_s,
            b_star=self.b_star, alpha_b=self.alpha_b,
            meta=dict(self.meta),
        )

    @classmethod
    def from_constants(cls, c: ScalingConstants, diagnostics: dict | None = None):
        return cls(
            n_c=c.n_c, alpha_n=c.alpha_n,
            s_c=c.s_c, alpha_s=c.alpha_s,
            b_star=c.b_star, alpha_b=c.alpha_b,
            meta=dict(c.meta), diagnostics=dict(diagnostics or {}),
        )


def _stage_dict(stage) -> dict:
    return {
        "slope": stage.slope,
        "intercept": stage.intercept,
        "r_squared": stage.r_squared,
        "residual_std": stage.residual_std,
        "count": stage.count,
    }


def document_from_report(report: FitReport) -> ConstantsDocument:
    """Build the serializable document for a pipeline report."""
    diagnostics: dict = {
        "converged_stage": _stage_dict(report.converged_stage),
        "step_stage": _stage_dict(report.step_stage),
        "contours": [
            {
                "loss_target": f.loss_target,
                "s_min_hat": f.s_min_hat,
                "e_min_hat": f.e_min_hat,
                "b_crit_hat": f.b_crit_hat,
                "point_count": f.point_count,
                "residual_rms": f.residual_rms,
            }
            for f in report.contours
        ],
        "complete": report.complete,
        "warnings": list(report.warnings),
    }
    if report.batch_stage is not None:
        diagnostics["batch_stage"] = _stage_dict(report.batch_stage)
    if report.post_correction is not None:
        p = report.post_correction
        diagnostics["post_correction"] = {
            "pair_count": p.pair_count,
            "residual_rms_before": p.residual_rms_before,
            "residual_rms_after": p.residual_rms_after,
        }
    meta = dict(report.constants.meta) if report.constants is not None else {}
    return ConstantsDocument(
        n_c=report.n_c, alpha_n=report.alpha_n,
        s_c=report.s_c, alpha_s=report.alpha_s,
        b_star=report.b_star, alpha_b=report.alpha_b,
        meta=meta, diagnostics=diagnostics,
    )


def _constant_repr(value: float | None) -> str:
    # 17 significant digits: scientific notation that parses back to the
    # identical double
    return "null" if value is None else format(float(value), ".16e")


def _nested_json(obj, pad: str) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    return text.replace("\n", "\n" + pad)


def write_constants(doc, target) -> None:
    """Write a constants document (or ScalingConstants) as JSON.

    Args:
        doc: ConstantsDocument, FitReport, or ScalingConstants.
        target: path, '-' for stdout, or an open text stream.
    """
    if isinstance(doc, ScalingConstants):
        doc = ConstantsDocument.from_constants(doc)
    elif isinstance(doc, FitReport):
        doc = document_from_report(doc)
    parts = [
        "{",
        f'  "schema_version": {SCHEMA_VERSION},',
        '  "kind": "scaling-constants",',
        '  "constants": {',
    ]
    for i, name in enumerate(_CONSTANT_FIELDS):
        comma = "," if i < len(_CONSTANT_FIELDS) - 1 else ""
        parts.append(f'    "{name}": {_constant_repr(getattr(doc, name))}{comma}')
    parts.append("  },")
    parts.append(f'  "meta": {_nested_json(doc.meta, "  ")},')
    parts.append(f'  "diagnostics": {_nested_json(doc.diagnostics, "  ")}')
    parts.append("}")
    with _open_out(target) as out:
        out.write("\n".join(parts) + "\n")


def read_constants(source) -> ConstantsDocument:
    """Parse a constants document.

    Raises:
        ParseError: not a constants document, or malformed values.
        FormatVersionError: unknown schema version.
    """
    with _open_in(source) as handle:
        text = handle.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"bad JSON: {e.msg}", line=e.lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("document must be a JSON object")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise FormatVersionError(f"unsupported schema version {version!r}")
    kind = obj.get("kind", "scaling-constants")
    if kind != "scaling-constants":
        raise ParseError(f"not a constants document (kind {kind!r})")
    block = obj.get("constants")
    if not isinstance(block, dict):
        raise ParseError("missing constants block")
    missing = [k for k in _CONSTANT_FIELDS if k not in block]
    if missing:
        raise ParseError(f"constants block missing {missing}")
    values = {}
    for name in _CONSTANT_FIELDS:
        raw = block[name]
        optional = name in ("b_star", "alpha_b")
        if raw is None and optional:
            values[name] = None
            continue
        try:
            v = float(raw)
        except (TypeError, ValueError):
            raise ParseError(f"constant {name} must be a number, got {raw!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise ParseError(f"constant {name} must be positive and finite, got {v!r}")
        values[name] = v
    meta = obj.get("meta", {})
    diagnostics = obj.get("diagnostics", {})
    if not isinstance(meta, dict) or not isinstance(diagnostics, dict):
        raise ParseError("meta and diagnostics must be objects")
    return ConstantsDocument(meta=meta, diagnostics=diagnostics, **values)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def preprocess(
    run: RunRecord,
    trim: WarmupTrim = WarmupTrim(),
    smooth_half_life: float | None = None,
    downsample: int = 1,
) -> RunRecord:
    """Shape a raw log for fitting: trim, then smooth, then downsample.

    Args:
        trim: warm-up trimming rule; WarmupTrim(0, 0) keeps everything.
        smooth_half_life: EMA half-life in steps, None to skip.
        downsample: keep every k-th sample per split.
    """
    run = trim_warmup(run, trim)
    if smooth_half_life is not None:
        run = ema_smooth(run, smooth_half_life)
    return downsample_run(run, downsample)
