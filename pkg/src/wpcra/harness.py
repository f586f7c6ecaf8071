"""End-to-end runs: train, certify, score and write reports."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .certification import AttackerTerms, CertConfig, RadiusReport, certify, rho_schedule
from .config import SWEEP_AXES, ExperimentConfig, dump_config
from .data import inject_trigger
from .engine import ExperimentResult, attack_spec, run_experiment
from .metrics import (
    MetricsReport,
    accuracy,
    certification_curve,
    emit_report,
    fnr,
    radius_grid,
)
from .model import predict
from .seeding import derive_rng

log = logging.getLogger(__name__)

__all__ = ["RunOutput", "cert_config", "evaluate", "run", "run_replicates", "sweep", "write_run"]

GRID_STEPS = 100


@dataclass
class RunOutput:
    result: ExperimentResult
    report: MetricsReport
    radii: RadiusReport | None


def cert_config(cfg: ExperimentConfig, final_weights, attacker_ids) -> CertConfig:
    """Certification settings for a finished run; attacker weights come from its last round."""
    terms = tuple(
        AttackerTerms(
            scale=cfg.scale_factor,
            learning_rate=cfg.learning_rate,
            local_iterations=cfg.local_iterations,
            poison_fraction=cfg.poison_fraction,
            weight=float(final_weights[i]),
        )
        for i in attacker_ids
    )
    return CertConfig(
        sigma=cfg.sigma, rho=rho_schedule, num_samples=cfg.smoothing_samples,
        eps_alpha=cfg.eps_alpha, lipschitz=cfg.lipschitz, attackers=terms,
        adversarial_round=cfg.adversarial_round, final_round=max(cfg.rounds, cfg.adversarial_round),
    )


def evaluate(result: ExperimentResult) -> RunOutput:
    cfg = result.config
    test = result.test
    if test is None:
        raise ValueError("the experiment result carries no test set")
    acc = accuracy(predict(result.theta, test.X), test.y)
    attackers = result.attacker_ids
    weights = result.final_weights
    if weights is None:
        weights = np.full(len(result.clients), 1.0 / len(result.clients))
    fnr_value = fnr(weights, attackers, len(result.clients))

    backdoor = None
    if attackers and cfg.poison_fraction > 0:
        victims = test.subset(np.flatnonzero(test.y != cfg.target_label))
        if len(victims):
            trig = inject_trigger(victims, attack_spec(cfg), derive_rng(cfg.seed, "backdoor-eval"),
                                  fraction=1.0)
            backdoor = float(np.mean(predict(result.theta, trig.X) == cfg.target_label))

    radii = None
    cr = ca = radius_M = radius_prime = None
    curve: list = []
    if attackers and cfg.sigma > 0 and cfg.rounds >= cfg.adversarial_round:
        cc = cert_config(cfg, weights, attackers)
        radii = certify(result.theta, test.X, test.num_classes, cc, derive_rng(cfg.seed, "smooth"))
        grid = radius_grid(radii.radius, GRID_STEPS)
        table = certification_curve(radii.radius, radii.c_a, test.y, grid)
        curve = [tuple(float(v) for v in row) for row in table]
        cr = float(table[:, 1].mean())
        ca = float(table[:, 2].mean())
        radius_prime, radius_M = radii.model_radius, radii.log_radius
        if radius_M is None:
            radius_prime = 0.0
    report = MetricsReport(
        acc=acc, certified_rate=cr, certified_accuracy=ca, fnr=fnr_value,
        radius_M=radius_M, radius_prime_M=radius_prime, curve=curve, backdoor_success=backdoor,
    )
    return RunOutput(result=result, report=report, radii=radii)


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunOutput:
    """Train, certify on the clean test set and optionally write the report files."""
    out = evaluate(run_experiment(cfg))
    if out_dir is not None:
        write_run(out, out_dir)
    return out


def write_run(out: RunOutput, out_dir: str | Path) -> None:
    cfg = out.result.config
    extra = {
        "attackers": out.result.attacker_ids,
        "final_weights": [float(w) for w in (out.result.final_weights
                                             if out.result.final_weights is not None else [])],
    }
    emit_report(out.report, out_dir, config_text=dump_config(cfg), seed=cfg.seed,
                ledgers=out.result.ledgers, extra=extra)
    if out.radii is not None:
        r = out.radii
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("sample", "label", "c_a", "c_b", "p_a", "p_b", "p_a_lower", "p_b_upper", "radius"))
        y = out.result.test.y
        for i in range(len(r.radius)):
            w.writerow((i, int(y[i]), int(r.c_a[i]), int(r.c_b[i]), repr(float(r.p_a[i])),
                        repr(float(r.p_b[i])), repr(float(r.p_a_lower[i])),
                        repr(float(r.p_b_upper[i])), repr(float(r.radius[i]))))
        (Path(out_dir) / "radii.csv").write_text(buf.getvalue(), encoding="utf-8")


REPLICATE_HEADER = ("seed", "Radius", "Acc", "CR", "CA", "FNR")


def run_replicates(cfg: ExperimentConfig, out_dir: str | Path | None = None):
    """Repeat ``cfg`` with seeds ``seed, seed + 1, ...`` and average the metrics.

    Returns the per-seed outputs and a dict of means over the metrics that are
    defined in every replicate (an infinite radius makes the mean infinite).
    """
    outs = []
    for k in range(cfg.replicates):
        one = cfg.replace(seed=cfg.seed + k, replicates=1)
        sub = None if out_dir is None else Path(out_dir) / f"seed={one.seed}"
        outs.append(run(one, sub))
    cols = {
        "Radius": [o.report.radius_M for o in outs],
        "Acc": [o.report.acc for o in outs],
        "CR": [o.report.certified_rate for o in outs],
        "CA": [o.report.certified_accuracy for o in outs],
        "FNR": [o.report.fnr for o in outs],
    }
    means = {k: (None if any(v is None for v in vals) else float(np.mean(vals)))
             for k, vals in cols.items()}
    if out_dir is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPLICATE_HEADER)
        for o in outs:
            r = o.report
            w.writerow((o.result.config.seed, *(_cell(x) for x in (
                r.radius_M, r.acc, r.certified_rate, r.certified_accuracy, r.fnr))))
        w.writerow(("mean", *(_cell(means[k]) for k in REPLICATE_HEADER[1:])))
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "replicates.csv").write_text(buf.getvalue(), encoding="utf-8")
    return outs, means


SWEEP_HEADER = ("axis", "value", "Radius", "Acc", "CR", "CA", "FNR")


def _cell(v):
    if v is None:
        return "n/a"
    return repr(float(v))


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir: str | Path | None = None):
    """One run per value of ``axis`` (N, R, T or sigma); returns the table rows."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    key = SWEEP_AXES[axis]
    rows = []
    for v in values:
        one = cfg.replace(**{key: v})
        sub = None if out_dir is None else Path(out_dir) / f"{axis}={v}"
        rep = run(one, sub).report
        rows.append((axis, v, rep.radius_M, rep.acc, rep.certified_rate,
                     rep.certified_accuracy, rep.fnr))
        log.info("%s=%s: %s", axis, v, " ".join(rep.summary_lines()))
    if out_dir is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for row in rows:
            w.writerow((row[0], row[1], *(_cell(x) for x in row[2:])))
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    return rows
