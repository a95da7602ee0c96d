"""Tests for msclust/config.py - Analysis defaults and TOML loading"""

from __future__ import annotations

import tomllib
from pathlib import Path

import pytest
from pydantic import ValidationError

from msclust.config import CONFIG_FILE_NAME, AnalysisConfig


class TestAnalysisConfig:
    """Test AnalysisConfig validation"""

    def test_defaults(self) -> None:
        cfg = AnalysisConfig()
        assert cfg.weighting == "all"
        assert cfg.reps == 1000
        assert cfg.transform == "loglog"
        assert cfg.domain == (10.0, 90.0)

    def test_choices_are_normalised(self) -> None:
        cfg = AnalysisConfig(weighting=" Typical ", method="CB")
        assert cfg.weighting == "typical"
        assert cfg.method == "cb"

    @pytest.mark.parametrize(
        "field,value",
        [("weighting", "some"), ("transform", "log"), ("method", "jackknife"), ("test_weight", 3), ("reps", 0)],
    )
    def test_rejects(self, field: str, value: object) -> None:
        with pytest.raises(ValidationError):
            AnalysisConfig(**{field: value})

    @pytest.mark.parametrize("n_jobs", [0, -2])
    def test_rejects_bad_n_jobs(self, n_jobs: int) -> None:
        with pytest.raises(ValidationError):
            AnalysisConfig(n_jobs=n_jobs)

    def test_all_cores_allowed(self) -> None:
        assert AnalysisConfig(n_jobs=-1).n_jobs == -1

    def test_domain_is_sorted(self) -> None:
        assert AnalysisConfig(domain_lo=80.0, domain_hi=20.0).domain == (20.0, 80.0)

    def test_assignment_is_validated(self) -> None:
        cfg = AnalysisConfig()
        with pytest.raises(ValidationError):
            cfg.alpha = 1.5


class TestLoad:
    """Test AnalysisConfig.load / to_toml"""

    def test_missing_file_gives_defaults(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.chdir(tmp_path)
        assert AnalysisConfig.load() == AnalysisConfig()

    def test_explicit_path(self, tmp_path: Path) -> None:
        path = tmp_path / "custom.toml"
        path.write_text('[analysis]\nweighting = "typical"\nreps = 250\n')
        cfg = AnalysisConfig.load(path)
        assert cfg.weighting == "typical"
        assert cfg.reps == 250

    def test_file_in_cwd(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        (tmp_path / CONFIG_FILE_NAME).write_text('[analysis]\nmethod = "cb"\n')
        monkeypatch.chdir(tmp_path)
        assert AnalysisConfig.load().method == "cb"

    def test_broken_toml_falls_back(self, tmp_path: Path) -> None:
        path = tmp_path / "broken.toml"
        path.write_text("[analysis\n")
        assert AnalysisConfig.load(path) == AnalysisConfig()

    def test_to_toml_round_trip(self) -> None:
        cfg = AnalysisConfig(weighting="typical", reps=42, transform="logit", pvalue_correction=True, n_jobs=-1)
        assert AnalysisConfig.model_validate(tomllib.loads(cfg.to_toml())["analysis"]) == cfg
