from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from .distribution import PteParams
from .errors import DataError, SchemaError
from .estimation import CountDataset, FitResult

logger = logging.getLogger(__name__)

UTC = timezone.utc

SCHEMA_VERSION = "1"
METHODS = ("moments", "proportion_moment", "mle")


@dataclass(frozen=True)
class ModelRecord:
    """A fitted PTE model as persisted by ``ptex fit --save``.

    Floats are written with Python's shortest round-trip repr, so every
    numeric field reloads bit for bit.
    """

    schema_version: str
    method: str
    alpha: float
    theta: float
    loglik: float
    se_alpha: float | None
    se_theta: float | None
    n: int
    fitted_at: str
    dataset_digest: str

    @classmethod
    def from_fit(cls, fit: FitResult, data: CountDataset) -> ModelRecord:
        se_alpha, se_theta = fit.se if fit.se is not None else (None, None)
        return cls(
            schema_version=SCHEMA_VERSION,
            method=fit.method,
            alpha=fit.params.alpha,
            theta=fit.params.theta,
            loglik=fit.loglik,
            se_alpha=se_alpha,
            se_theta=se_theta,
            n=data.n,
            fitted_at=datetime.now(UTC).isoformat(timespec="seconds"),
            dataset_digest=data.digest,
        )

    @property
    def params(self) -> PteParams:
        return PteParams(self.alpha, self.theta)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Any, source: str | Path | None = None) -> ModelRecord:
        if not isinstance(raw, dict):
            raise SchemaError("model record must be a JSON object", source)
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(
                f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION!r})",
                source,
            )
        missing = [f.name for f in fields(cls) if f.name not in raw]
        if missing:
            raise SchemaError(f"missing fields: {', '.join(missing)}", source)
        try:
            record = cls(
                schema_version=version,
                method=_method(raw["method"]),
                alpha=_real(raw["alpha"], "alpha"),
                theta=_real(raw["theta"], "theta"),
                loglik=_real(raw["loglik"], "loglik"),
                se_alpha=_optional_real(raw["se_alpha"], "se_alpha"),
                se_theta=_optional_real(raw["se_theta"], "se_theta"),
                n=_count(raw["n"]),
                fitted_at=_text(raw["fitted_at"], "fitted_at"),
                dataset_digest=_text(raw["dataset_digest"], "dataset_digest"),
            )
            PteParams(record.alpha, record.theta)
        except ValueError as e:
            raise SchemaError(str(e), source) from e
        return record

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        logger.info("Saved %s model to %s", self.method, path)
        return path

    @classmethod
    def load(cls, path: str | Path) -> ModelRecord:
        try:
            text = Path(path).read_text()
        except FileNotFoundError as e:
            raise DataError("file not found", path) from e
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"corrupted JSON: {e.msg}", path, line=e.lineno) from e
        return cls.from_dict(raw, path)


def _real(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite")
    return float(value)


def _optional_real(value: Any, name: str) -> float | None:
    return None if value is None else _real(value, name)


def _count(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ValueError(f"n must be a positive integer, got {value!r}")
    return value


def _text(value: Any, name: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{name} must be a non-empty string")
    return value


def _method(value: Any) -> str:
    if value not in METHODS:
        raise ValueError(f"unknown method {value!r}")
    return value
