"""Tests for msclust/formats.py - Transitions files, curve files and state spaces"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from msclust.exceptions import ConfigError, DataValidationError, ErrorCode, ParseError
from msclust.formats import (
    TRANSITIONS_HEADER,
    CurveMetadata,
    CurveOutput,
    parse_state_space,
    read_curve,
    read_transitions,
    write_curve,
    write_transitions,
)
from msclust.models import ClusteredDataset, StateSpace, TerminusKind

HEADER = ",".join(TRANSITIONS_HEADER)


def _write(tmp_path: Path, *rows: str, header: str = HEADER) -> Path:
    path = tmp_path / "data.csv"
    path.write_text("\n".join([header, *rows]) + "\n")
    return path


@pytest.fixture
def curve() -> CurveOutput:
    return CurveOutput(
        metadata=CurveMetadata(
            target="occupation:2",
            weighting="typical",
            method="if",
            reps=500,
            seed=3,
            transform="loglog",
            alpha=0.05,
            domain_percentiles=(10.0, 90.0),
            domain_interval=(0.5, 1.5),
            critical_value=2.6,
            n_clusters=3,
        ),
        t=np.array([0.5, 1.0, 1.5]),
        estimate=np.array([0.1, 1 / 3, 0.2]),
        se=np.array([0.05, 0.1, np.nan]),
        ci_lo=np.array([0.02, 0.15, np.nan]),
        ci_hi=np.array([0.2, 0.55, np.nan]),
        band_lo=np.array([0.01, 0.1, np.nan]),
        band_hi=np.array([0.3, 0.6, np.nan]),
        domain_flag=np.array([True, True, False]),
    )


class TestReadTransitions:
    """Test read_transitions"""

    def test_two_row_subject(self, tmp_path: Path) -> None:
        data = read_transitions(_write(tmp_path, "c1,s1,,0,1.0,1,2,1", "c1,s1,,0,2.0,2,2,0"))
        (member,) = data.clusters[0].members
        assert member.initial_state == 1
        assert [(r.time, r.from_state, r.to_state) for r in member.records] == [(1.0, 1, 2)]
        assert member.terminus.time == 2.0
        assert member.terminus.kind is TerminusKind.CENSORED
        assert member.arm is None

    def test_absorbed_without_terminal_row(self, tmp_path: Path) -> None:
        data = read_transitions(_write(tmp_path, "c1,s1,1,0.5,1.5,1,3,1"))
        (member,) = data.clusters[0].members
        assert member.terminus.kind is TerminusKind.ABSORBED
        assert member.entry_time == 0.5
        assert member.arm == 1

    def test_absorbed_status_row_accepted(self, tmp_path: Path) -> None:
        data = read_transitions(_write(tmp_path, "c1,s1,,0,1.5,1,3,1", "c1,s1,,0,1.5,3,3,2"))
        assert data.clusters[0].members[0].terminus.kind is TerminusKind.ABSORBED

    def test_groups_subjects_by_cluster(self, tmp_path: Path) -> None:
        data = read_transitions(
            _write(tmp_path, "c1,a,,0,2.0,1,1,0", "c2,a,,0,3.0,1,1,0", "c1,b,,0,1.0,1,3,1")
        )
        assert [c.cluster_id for c in data.clusters] == ["c1", "c2"]
        assert [c.size for c in data.clusters] == [2, 1]

    def test_header_only(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError) as exc_info:
            read_transitions(_write(tmp_path))
        assert ErrorCode.EMPTY_DATASET in exc_info.value.codes

    def test_bad_header(self, tmp_path: Path) -> None:
        with pytest.raises(ParseError) as exc_info:
            read_transitions(_write(tmp_path, "c1,s1,0,2.0,1,1,0", header="cluster,subject,entry,time,from,to,status"))
        assert exc_info.value.code == ErrorCode.BAD_HEADER.value
        assert exc_info.value.line == 1

    def test_empty_file(self, tmp_path: Path) -> None:
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            read_transitions(path)

    @pytest.mark.parametrize(
        "row",
        ["c1,s1,,0,abc,1,1,0", "c1,s1,,0,-1,1,1,0", "c1,s1,,0,2.0,1,1,7", ",s1,,0,2.0,1,1,0", "c1,s1,x,0,2.0,1,1,0"],
    )
    def test_malformed_row(self, tmp_path: Path, row: str) -> None:
        with pytest.raises(ParseError) as exc_info:
            read_transitions(_write(tmp_path, row))
        assert exc_info.value.line == 2

    def test_missing_terminal_row(self, tmp_path: Path) -> None:
        with pytest.raises(ParseError) as exc_info:
            read_transitions(_write(tmp_path, "c1,s1,,0,1.0,1,2,1"))
        assert "terminal" in str(exc_info.value)

    def test_second_terminal_row(self, tmp_path: Path) -> None:
        with pytest.raises(ParseError) as exc_info:
            read_transitions(_write(tmp_path, "c1,s1,,0,2.0,1,1,0", "c1,s1,,0,3.0,1,1,0"))
        assert exc_info.value.line == 3

    def test_transition_from_absorbing(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError) as exc_info:
            read_transitions(_write(tmp_path, "c1,s1,,0,1.0,3,1,1", "c1,s1,,0,2.0,1,1,0"))
        assert ErrorCode.TRANSITION_FROM_ABSORBING in exc_info.value.codes
        assert all(v.line == 2 for v in exc_info.value.violations)

    def test_rows_out_of_time_order(self, tmp_path: Path) -> None:
        data = read_transitions(_write(tmp_path, "c1,s1,,0,3.0,2,3,1", "c1,s1,,0,1.0,1,2,1"))
        (member,) = data.clusters[0].members
        assert [(r.time, r.to_state) for r in member.records] == [(1.0, 2), (3.0, 3)]
        assert member.terminus.kind is TerminusKind.ABSORBED
        assert member.terminus.time == 3.0

    def test_tied_transition_times(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError) as exc_info:
            read_transitions(_write(tmp_path, "c1,s1,,0,1.0,1,2,1", "c1,s1,,0,1.0,2,3,1"))
        assert ErrorCode.NON_MONOTONE_TIMES in exc_info.value.codes

    def test_require_arms(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError):
            read_transitions(_write(tmp_path, "c1,s1,,0,2.0,1,1,0"), require_arms=True)

    def test_round_trip(self, tmp_path: Path, two_arm_data: ClusteredDataset) -> None:
        path = tmp_path / "out.csv"
        write_transitions(two_arm_data, path)
        assert read_transitions(path, require_arms=True) == two_arm_data


class TestCurveFiles:
    """Test write_curve / read_curve"""

    @pytest.mark.parametrize("suffix", [".csv", ".json"])
    def test_round_trip(self, tmp_path: Path, curve: CurveOutput, suffix: str) -> None:
        path = tmp_path / f"curve{suffix}"
        write_curve(curve, path)
        back = read_curve(path)
        assert back.metadata == curve.metadata
        np.testing.assert_array_equal(back.t, curve.t)
        np.testing.assert_array_equal(back.estimate, curve.estimate)
        np.testing.assert_array_equal(back.band_hi, curve.band_hi)
        np.testing.assert_array_equal(back.domain_flag, curve.domain_flag)

    def test_csv_starts_with_metadata(self, tmp_path: Path, curve: CurveOutput) -> None:
        path = tmp_path / "curve.csv"
        write_curve(curve, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# msclust-curve ")
        assert lines[1] == "t,estimate,se,ci_lo,ci_hi,band_lo,band_hi,domain_flag"

    def test_json_uses_null_for_nan(self, curve: CurveOutput) -> None:
        assert curve.to_dict()["columns"]["se"][-1] is None

    def test_missing_metadata_line(self, tmp_path: Path) -> None:
        path = tmp_path / "curve.csv"
        path.write_text("t,estimate\n1,0.5\n")
        with pytest.raises(ParseError):
            read_curve(path)


class TestStateSpace:
    """Test parse_state_space"""

    def test_named(self) -> None:
        assert parse_state_space("illness-death") == StateSpace.illness_death()
        assert parse_state_space("Survival") == StateSpace.survival()
        assert parse_state_space("illness-death-recovery").is_allowed(2, 1)

    def test_generic(self) -> None:
        space = parse_state_space("4:3,4")
        assert space.k == 4
        assert space.absorbing == frozenset({3, 4})
        assert space.transient == [1, 2]

    @pytest.mark.parametrize("text", ["four", "4:x", "3:5"])
    def test_rejects(self, text: str) -> None:
        with pytest.raises((ConfigError, ValueError)):
            parse_state_space(text)
