"""
File Formats
============

TransitionsFile (delimited, one row per transition plus one terminal row per
censored subject), CurveOutput (CSV with a metadata line, or JSON) and study
report JSON.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from msclust.config import CURVE_DIGITS
from msclust.exceptions import (
    ConfigError,
    DataValidationError,
    ErrorCode,
    ParseError,
    Violation,
)
from msclust.models import (
    Cluster,
    ClusteredDataset,
    StateSpace,
    SubjectPath,
    Terminus,
    TerminusKind,
    Transition,
    collect_violations,
)

if TYPE_CHECKING:
    from msclust.sim.study import StudyReport

logger = logging.getLogger(__name__)

TRANSITIONS_HEADER = ["cluster", "subject", "arm", "entry", "time", "from", "to", "status"]
CURVE_COLUMNS = ["t", "estimate", "se", "ci_lo", "ci_hi", "band_lo", "band_hi", "domain_flag"]
CURVE_MARKER = "# msclust-curve "

STATUS_CENSORED = 0
STATUS_TRANSITION = 1
STATUS_ABSORBED = 2


def _fmt(x: float) -> str:
    return format(x, f".{CURVE_DIGITS}g")


# =============================================================================
# State spaces
# =============================================================================


def parse_state_space(text: str) -> StateSpace:
    """`illness-death`, `illness-death-recovery`, `survival` or `K:a,b` (k states, absorbing a, b)."""
    key = text.strip().lower()
    if key == "illness-death":
        return StateSpace.illness_death()
    if key == "illness-death-recovery":
        return StateSpace.illness_death(progressive=False)
    if key == "survival":
        return StateSpace.survival()
    try:
        k_text, _, absorbing_text = key.partition(":")
        absorbing = frozenset(int(a) for a in absorbing_text.split(",") if a.strip())
        return StateSpace(k=int(k_text), absorbing=absorbing)
    except ValueError as e:
        raise ConfigError(f"invalid state space {text!r}: {e}", ErrorCode.INVALID_CONFIG.value) from e


# =============================================================================
# TransitionsFile
# =============================================================================


@dataclass
class _SubjectRows:
    cluster: str
    subject: str
    line: int
    arm: int | None
    entry: float
    transitions: list[Transition]
    terminal: tuple[float, int, int] | None = None


def _number(value: str, name: str, line: int) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ParseError(f"{name}={value!r} is not a number", line) from None
    if not math.isfinite(x) or x < 0:
        raise ParseError(f"{name}={value!r} must be finite and >= 0", line)
    return x


def _integer(value: str, name: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"{name}={value!r} is not an integer", line) from None


def read_transitions(
    path: Path,
    state_space: StateSpace | None = None,
    require_arms: bool = False,
) -> ClusteredDataset:
    """Parse and validate a TransitionsFile.

    Raises:
        ParseError: Malformed row (1-based line number, header is line 1).
        DataValidationError: Every broken invariant, with line numbers.
    """
    space = state_space or StateSpace.illness_death()
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ParseError("file is empty (missing header)", 1, ErrorCode.BAD_HEADER.value) from None
    except pd.errors.ParserError as e:
        found = re.search(r"line (\d+)", str(e))
        raise ParseError(str(e), int(found.group(1)) if found else 0) from None
    columns = [c.strip() for c in frame.columns]
    if columns != TRANSITIONS_HEADER:
        raise ParseError(f"header must be {','.join(TRANSITIONS_HEADER)}", 1, ErrorCode.BAD_HEADER.value)

    subjects: dict[tuple[str, str], _SubjectRows] = {}
    for index, row in enumerate(frame.itertuples(index=False, name=None)):
        line = index + 2
        cluster, subject, arm_text, entry_text, time_text, from_text, to_text, status_text = (
            str(v).strip() for v in row
        )
        if not cluster or not subject:
            raise ParseError("cluster and subject ids are required", line)
        arm = _integer(arm_text, "arm", line) if arm_text else None
        entry = _number(entry_text, "entry", line)
        time = _number(time_text, "time", line)
        from_state = _integer(from_text, "from", line)
        to_state = _integer(to_text, "to", line)
        status = _integer(status_text, "status", line)

        key = (cluster, subject)
        rows = subjects.get(key)
        if rows is None:
            rows = subjects[key] = _SubjectRows(cluster, subject, line, arm, entry, [])
        elif rows.entry != entry:
            raise ParseError(f"entry {entry} differs from earlier rows ({rows.entry})", line)
        elif rows.arm != arm:
            raise ParseError(f"arm {arm} differs from earlier rows ({rows.arm})", line)

        if status == STATUS_TRANSITION:
            rows.transitions.append(Transition(time=time, from_state=from_state, to_state=to_state))
        elif status in (STATUS_CENSORED, STATUS_ABSORBED):
            if rows.terminal is not None:
                raise ParseError(f"second terminal row for subject {subject}", line)
            rows.terminal = (time, status, from_state)
        else:
            raise ParseError(f"status must be 0, 1 or 2, got {status}", line)

    clusters: dict[str, list[SubjectPath]] = {}
    lines: dict[tuple[str, str | None], int] = {}
    for rows in subjects.values():
        path_ = _assemble(rows, space)
        clusters.setdefault(rows.cluster, []).append(path_)
        lines[(rows.cluster, rows.subject)] = rows.line
        lines.setdefault((rows.cluster, None), rows.line)

    dataset = ClusteredDataset(
        state_space=space,
        clusters=tuple(Cluster(cluster_id=cid, members=tuple(members)) for cid, members in clusters.items()),
    )
    violations = collect_violations(dataset, require_arms=require_arms)
    if violations:
        raise DataValidationError(
            [
                Violation(
                    code=v.code,
                    message=v.message,
                    cluster_id=v.cluster_id,
                    subject_id=v.subject_id,
                    line=lines.get((v.cluster_id or "", v.subject_id)),
                )
                for v in violations
            ]
        )
    logger.info(f"Read {dataset.subject_count} subjects in {dataset.n} clusters from {path}")
    return dataset


def _assemble(rows: _SubjectRows, space: StateSpace) -> SubjectPath:
    records = tuple(sorted(rows.transitions, key=lambda r: r.time))
    if rows.terminal is not None:
        time, status, state = rows.terminal
        initial = records[0].from_state if records else state
        kind = TerminusKind.ABSORBED if status == STATUS_ABSORBED else TerminusKind.CENSORED
        terminus = Terminus(time=time, kind=kind)
    elif records and records[-1].to_state in space.absorbing:
        initial = records[0].from_state
        terminus = Terminus(time=records[-1].time, kind=TerminusKind.ABSORBED)
    else:
        raise ParseError(f"subject {rows.subject} in cluster {rows.cluster} has no terminal row", rows.line)
    return SubjectPath(
        subject_id=rows.subject,
        entry_time=rows.entry,
        initial_state=initial,
        records=records,
        terminus=terminus,
        arm=rows.arm,
    )


def write_transitions(data: ClusteredDataset, path: Path) -> None:
    """Write `data` as a TransitionsFile (absorbed subjects get no terminal row)."""
    out: list[list[str]] = []
    for cluster, member in data.subjects():
        arm = "" if member.arm is None else str(member.arm)
        entry = _fmt(member.entry_time)
        for rec in member.records:
            out.append(
                [cluster.cluster_id, member.subject_id, arm, entry, _fmt(rec.time), str(rec.from_state), str(rec.to_state), "1"]
            )
        if member.terminus.kind is TerminusKind.CENSORED:
            state = str(member.final_state)
            out.append([cluster.cluster_id, member.subject_id, arm, entry, _fmt(member.terminus.time), state, state, "0"])
    pd.DataFrame(out, columns=TRANSITIONS_HEADER).to_csv(path, index=False)
    logger.debug(f"Wrote {len(out)} rows to {path}")


# =============================================================================
# CurveOutput
# =============================================================================


class CurveMetadata(BaseModel):
    """Provenance of a curve: everything needed to reproduce it."""

    model_config = ConfigDict(frozen=True)

    target: str
    weighting: str
    method: str
    reps: int
    seed: int | None
    transform: str
    alpha: float
    domain_percentiles: tuple[float, float]
    domain_interval: tuple[float, float] | None = None
    critical_value: float | None = None
    n_clusters: int = 0
    landmarked: bool = False
    markov_only: bool = False


@dataclass(frozen=True, eq=False)
class CurveOutput:
    """Estimate with standard errors, pointwise intervals and band on one grid."""

    metadata: CurveMetadata
    t: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    domain_flag: np.ndarray

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({c: getattr(self, c) for c in CURVE_COLUMNS}).assign(
            domain_flag=lambda df: df["domain_flag"].astype(int)
        )

    def to_dict(self) -> dict[str, Any]:
        def clean(arr: np.ndarray) -> list[float | None]:
            return [None if not math.isfinite(float(x)) else float(x) for x in arr]

        columns: dict[str, Any] = {c: clean(getattr(self, c)) for c in CURVE_COLUMNS if c != "domain_flag"}
        columns["domain_flag"] = [bool(x) for x in self.domain_flag]
        return {"metadata": self.metadata.model_dump(mode="json"), "columns": columns}

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> CurveOutput:
        columns = payload["columns"]

        def arr(name: str) -> np.ndarray:
            return np.array([np.nan if x is None else x for x in columns[name]], dtype=float)

        return cls(
            metadata=CurveMetadata.model_validate(payload["metadata"]),
            domain_flag=np.array(columns["domain_flag"], dtype=bool),
            **{c: arr(c) for c in CURVE_COLUMNS if c != "domain_flag"},
        )


def write_curve(curve: CurveOutput, path: Path) -> None:
    """CSV with a leading metadata line, or JSON when the suffix is .json."""
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(curve.to_dict(), indent=2))
        return
    with open(path, "w", newline="") as f:
        f.write(CURVE_MARKER + curve.metadata.model_dump_json() + "\n")
        curve.frame().to_csv(f, index=False, float_format=f"%.{CURVE_DIGITS}g")


def read_curve(path: Path) -> CurveOutput:
    if path.suffix.lower() == ".json":
        return CurveOutput.from_dict(json.loads(path.read_text()))
    with open(path) as f:
        first = f.readline()
        if not first.startswith(CURVE_MARKER):
            raise ParseError("missing curve metadata line", 1, ErrorCode.BAD_HEADER.value)
        metadata = CurveMetadata.model_validate_json(first[len(CURVE_MARKER) :])
        frame = pd.read_csv(f, dtype=float)
    if list(frame.columns) != CURVE_COLUMNS:
        raise ParseError(f"curve columns must be {','.join(CURVE_COLUMNS)}", 2, ErrorCode.BAD_HEADER.value)
    return CurveOutput(
        metadata=metadata,
        domain_flag=frame["domain_flag"].to_numpy() > 0,
        **{c: frame[c].to_numpy(dtype=float) for c in CURVE_COLUMNS if c != "domain_flag"},
    )


# =============================================================================
# Study reports
# =============================================================================


def write_report(report: BaseModel, path: Path) -> None:
    path.write_text(report.model_dump_json(indent=2))


def read_report(path: Path) -> StudyReport:
    from msclust.sim.study import StudyReport

    return StudyReport.model_validate_json(path.read_text())
