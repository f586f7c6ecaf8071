"""Evaluation metrics and report files."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MetricsReport",
    "accuracy",
    "radius_grid",
    "certified_rate",
    "certified_accuracy",
    "certification_curve",
    "fnr",
    "emit_report",
    "read_report",
    "CURVE_HEADER",
    "format_metric",
]

CURVE_HEADER = ("r_j", "certified_fraction", "certified_correct_fraction")


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be non-empty and the same shape")
    return float(np.mean(predictions == labels))


def radius_grid(radii, n: int = 100) -> np.ndarray:
    """``n + 1`` equally spaced thresholds from 0 to the largest finite radius."""
    r = np.asarray(radii, dtype=float)
    finite = r[np.isfinite(r)]
    top = float(finite.max()) if finite.size else 0.0
    return np.linspace(0.0, max(top, 0.0), n + 1)


def certification_curve(radii, predictions, labels, grid) -> np.ndarray:
    """Rows of (threshold, fraction certified, fraction certified and correct)."""
    r = np.asarray(radii, dtype=float)[None, :]
    g = np.asarray(grid, dtype=float)[:, None]
    ok = r >= g
    correct = (np.asarray(predictions) == np.asarray(labels))[None, :]
    return np.column_stack([grid, ok.mean(axis=1), (ok & correct).mean(axis=1)])


def certified_rate(radii, grid) -> float:
    """Certified fraction averaged over all grid thresholds (abstentions carry radius 0)."""
    r = np.asarray(radii, dtype=float)
    return float(np.mean(r[None, :] >= np.asarray(grid, dtype=float)[:, None]))


def certified_accuracy(radii, predictions, labels, grid) -> float:
    """Like :func:`certified_rate` but a sample also has to be classified correctly."""
    return float(certification_curve(radii, predictions, labels, grid)[:, 2].mean())


def fnr(final_weights, attacker_ids, num_clients: int) -> float:
    """Share of attackers whose weight strictly exceeds the uniform share ``1/N``."""
    ids = list(attacker_ids)
    if not ids:
        return 0.0
    w = np.asarray(final_weights, dtype=float)
    return float(np.mean(w[ids] > 1.0 / num_clients))


@dataclass
class MetricsReport:
    acc: float
    certified_rate: float | None
    certified_accuracy: float | None
    fnr: float
    radius_M: float | None
    radius_prime_M: float | None
    curve: list[tuple[float, float, float]] = field(default_factory=list)
    backdoor_success: float | None = None
    weights_round: str = "final"

    def summary_lines(self) -> list[str]:
        return [
            f"Radius {format_metric(self.radius_M)}",
            f"Acc {format_metric(self.acc)}",
            f"CR {format_metric(self.certified_rate)}",
            f"CA {format_metric(self.certified_accuracy)}",
            f"FNR {format_metric(self.fnr)}",
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["curve"] = [list(row) for row in self.curve]
        return _encode(d)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = _decode(dict(d))
        d["curve"] = [tuple(row) for row in d.get("curve", [])]
        return cls(**d)


def format_metric(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return f"{v:.4f}"


def _encode(obj):
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if obj is None:
        return "n/a"
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if obj == "inf":
        return math.inf
    if obj == "-inf":
        return -math.inf
    if obj == "n/a":
        return None
    return obj


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit_report(report: MetricsReport, out_dir: str | Path, *, config_text: str = "",
                seed: int | None = None, ledgers=(), extra: dict | None = None) -> dict[str, Path]:
    """Write ``metrics.json``, ``curves.csv``, ``ledger.csv`` and ``config.txt`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out / "metrics.json",
        "curves": out / "curves.csv",
        "ledger": out / "ledger.csv",
        "config": out / "config.txt",
    }
    doc = {"metrics": report.to_dict(), "seed": seed, "config": config_text}
    if extra:
        doc.update(_encode(extra))
    paths["metrics"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_csv(paths["curves"], CURVE_HEADER, report.curve)
    rows = []
    for led in ledgers:
        before = float(np.linalg.norm(led.global_before))
        after = float(np.linalg.norm(led.global_after))
        for i, (u, w) in enumerate(zip(led.updates, led.weights)):
            rows.append((led.round, i, float(np.linalg.norm(u)), float(w),
                         int(i in led.attacking), before, after))
    _write_csv(paths["ledger"],
               ("round", "client", "update_norm", "weight", "attacking", "global_norm_before",
                "global_norm_after"), rows)
    paths["config"].write_text(config_text, encoding="utf-8")
    return paths


def read_report(path: str | Path) -> tuple[MetricsReport, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return MetricsReport.from_dict(doc["metrics"]), doc
