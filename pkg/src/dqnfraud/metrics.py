"""Classification and business metrics over a vector of approve/decline decisions.

Declining (action 1) is the positive prediction; fraud (label 1) is the
positive class.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, asdict

import numpy as np

from . import _backend

BPS_DENOMINATORS = ("all", "approved")


def _check(actions, labels):
    a = np.asarray(actions, dtype=np.int64).ravel()
    y = np.asarray(labels, dtype=np.int64).ravel()
    if a.shape != y.shape:
        raise ValueError(f"{a.shape[0]} actions but {y.shape[0]} labels")
    return a, y


def confusion(actions, labels):
    a, y = _check(actions, labels)
    return {
        "TP": int(np.count_nonzero((a == 1) & (y == 1))),
        "FP": int(np.count_nonzero((a == 1) & (y == 0))),
        "TN": int(np.count_nonzero((a == 0) & (y == 0))),
        "FN": int(np.count_nonzero((a == 0) & (y == 1))),
    }


def _ratio(num, den):
    return num / den if den else 0.0


def classification_report(actions, labels):
    """``(precision, recall, f1, confusion)``; empty denominators give 0."""
    c = confusion(actions, labels)
    precision = _ratio(c["TP"], c["TP"] + c["FP"])
    recall = _ratio(c["TP"], c["TP"] + c["FN"])
    f1 = _ratio(2 * precision * recall, precision + recall)
    return precision, recall, f1, c


def approval_pct(actions):
    a = np.asarray(actions).ravel()
    if a.shape[0] == 0:
        return 0.0
    return 100.0 * np.count_nonzero(a == 0) / a.shape[0]


def fraud_bps(actions, labels, denominator="all"):
    """Approved frauds per 10,000 decisions (or per 10,000 approvals)."""
    a, y = _check(actions, labels)
    if denominator not in BPS_DENOMINATORS:
        raise ValueError(f"denominator must be one of {BPS_DENOMINATORS}")
    approved_fraud = np.count_nonzero((a == 0) & (y == 1))
    total = a.shape[0] if denominator == "all" else np.count_nonzero(a == 0)
    return 10000.0 * _ratio(approved_fraud, total)


def monetary_breakdown(actions, labels, amounts):
    a, y = _check(actions, labels)
    amt = np.asarray(amounts, dtype=np.float64).ravel()
    if amt.shape != a.shape:
        raise ValueError("amounts length differs from actions")

    def total(mask):
        return float(amt[mask].sum())

    return {
        "genuine_approved": total((y == 0) & (a == 0)),
        "genuine_declined": total((y == 0) & (a == 1)),
        "fraud_approved": total((y == 1) & (a == 0)),
        "fraud_declined": total((y == 1) & (a == 1)),
    }


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    approval_pct: float
    fraud_bps: float
    money: dict
    confusion: dict
    n_decisions: int
    fraud_bps_denominator: str = "all"

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def metrics_report(actions, labels, amounts, fraud_bps_denominator="all"):
    precision, recall, f1, conf = classification_report(actions, labels)
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1,
        approval_pct=approval_pct(actions),
        fraud_bps=fraud_bps(actions, labels, fraud_bps_denominator),
        money=monetary_breakdown(actions, labels, amounts),
        confusion=conf,
        n_decisions=len(np.asarray(actions).ravel()),
        fraud_bps_denominator=fraud_bps_denominator,
    )


@dataclass
class TraceRow:
    episode: int
    dr: float
    fr: float
    fraud_count: int
    partial: bool


TRACE_FIELDS = ["episode", "dr", "fr", "fraud_count", "partial"]


def episode_trace(actions, labels, env_config):
    """Per-episode rates (at each episode's last decision) and fraud counts.

    Rates follow the environment's window rules, so they match what an agent
    saw in its state while producing ``actions``.
    """
    a, y = _check(actions, labels)
    n = a.shape[0]
    length = env_config.episode_length
    dr, fr = _backend.rolling_rates(
        a, y, env_config.rate_window, length, env_config.window_mode == "per_episode_reset"
    )
    rows = []
    for ep, start in enumerate(range(0, n, length), start=1):
        end = min(start + length, n)
        rows.append(
            TraceRow(ep, float(dr[end - 1]), float(fr[end - 1]), int(y[start:end].sum()), end - start < length)
        )
    return rows


def write_trace(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in rows:
            w.writerow([r.episode, r.dr, r.fr, r.fraud_count, int(r.partial)])
