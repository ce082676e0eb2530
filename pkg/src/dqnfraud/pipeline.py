"""End-to-end runs: data -> model -> decisions -> metrics, and their on-disk artifacts."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import agent as dqn
from .baseline import predict_baseline, train_baseline, tune_threshold
from .config import ConfigError, config_from_dict, with_overrides
from .data import prepare, synth_frame, write_csv
from .environment import TransactionEnv
from .metrics import episode_trace, metrics_report, write_trace
from .neuralnet import checkpoint_load, checkpoint_save
from .rewards import imbalance_ratio, make_reward_fn

log = logging.getLogger(__name__)

CHECKPOINT = "checkpoint.json"
TRAIN_LOG = "train_log.csv"
METRICS = "metrics.json"
TRACE = "trace.csv"
ACTIONS = "actions.csv"
RESOLVED_CONFIG = "resolved_config.json"
SYNTH_CSV = "synthetic.csv"
COMPARE_CSV = "compare.csv"
SWEEP_CSV = "sweep_beta.csv"

TABLE_COLUMNS = [
    "Model", "Precision", "Recall", "F1", "App%", "F(bps)",
    "FN_app", "FN_dec", "F_app", "F_dec",
]
SWEEP_COLUMNS = ["beta", "Precision", "Recall", "F1", "App%", "F(bps)", "runs"]


@dataclass
class TrainedModel:
    """Either a DQN agent or a thresholded supervised net, plus run metadata."""

    config: object  # resolved RunConfig
    net: object
    adam: object = None
    threshold: float | None = None
    log_rows: list = None
    extra: dict = None

    @property
    def kind(self):
        return self.config.model


def _mkdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def write_synth(config, out_dir):
    if config.dataset.source != "synthetic":
        raise ConfigError("synth needs a dataset with source 'synthetic'")
    path = os.path.join(_mkdir(out_dir), SYNTH_CSV)
    write_csv(synth_frame(config.dataset.synth), path)
    return path


def train_model(config, prepared):
    """Train what ``config.model`` names on the prepared training split."""
    if config.model == "nn":
        result = train_baseline(prepared.train, prepared.validation, config.baseline, config.seed)
        threshold = tune_threshold(result.net, prepared.validation, config.baseline.threshold_grid)
        rows = [
            {"epoch": e, "train_loss": tl, "val_loss": vl}
            for e, (tl, vl) in enumerate(zip(result.train_loss, result.val_loss))
        ]
        extra = {"best_epoch": result.best_epoch, "stopped_early": result.stopped_early}
        return TrainedModel(config, result.net, None, threshold, rows, extra)

    reward_fn, reward_cfg = make_reward_fn(config.reward, prepared.train.labels)
    resolved = with_overrides(config, **{"reward.lambda_prime": reward_cfg.lambda_prime})
    stats = imbalance_ratio(prepared.train.labels)
    if config.reward.kind == "rprime":
        log.info("rprime lambda = training imbalance ratio %.8g (%d fraud / %d genuine)",
                 reward_cfg.lambda_prime, stats.fraud_count, stats.genuine_count)
    env = TransactionEnv(prepared.train, config.env)
    agent = dqn.DqnAgent(env.state_size, config.agent, seed=config.seed)
    rows = dqn.train(agent, env, reward_fn)
    extra = {
        "sync_episodes": agent.sync_episodes,
        "steps": agent.global_step,
        "imbalance_ratio": stats.ratio,
    }
    return TrainedModel(resolved, agent.net, agent.adam, None, rows, extra)


def decide(model, data):
    """Per-transaction actions on ``data`` (greedy for the agent)."""
    if model.kind == "nn":
        return predict_baseline(model.net, model.threshold, data)
    agent = dqn.DqnAgent(data.n_features + 2, model.config.agent, net=model.net)
    actions, _, _ = dqn.evaluate(agent, data, model.config.env)
    return actions


def evaluate_model(model, data):
    actions = decide(model, data)
    cfg = model.config
    report = metrics_report(actions, data.labels, data.amounts, cfg.fraud_bps_denominator)
    trace = episode_trace(actions, data.labels, cfg.env)
    return actions, report, trace


def table_row(label, report):
    m = report.money
    return {
        "Model": label,
        "Precision": report.precision,
        "Recall": report.recall,
        "F1": report.f1,
        "App%": report.approval_pct,
        "F(bps)": report.fraud_bps,
        "FN_app": m["genuine_approved"],
        "FN_dec": m["genuine_declined"],
        "F_app": m["fraud_approved"],
        "F_dec": m["fraud_declined"],
    }


def _write_rows(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


# -- artifacts ---------------------------------------------------------------


def save_model(model, out_dir):
    _mkdir(out_dir)
    cfg = model.config
    if model.kind == "nn":
        checkpoint_save(model.net, model.adam, os.path.join(out_dir, CHECKPOINT),
                        head="sigmoid", threshold=model.threshold, model="nn")
        _write_rows(os.path.join(out_dir, TRAIN_LOG), ["epoch", "train_loss", "val_loss"], model.log_rows)
    else:
        checkpoint_save(model.net, model.adam, os.path.join(out_dir, CHECKPOINT),
                        head="q", model="dqn", reward=cfg.reward.kind)
        dqn.write_train_log(model.log_rows, os.path.join(out_dir, TRAIN_LOG))
    snapshot = with_overrides(cfg, out_dir=None)
    with open(os.path.join(out_dir, RESOLVED_CONFIG), "w", encoding="utf-8") as fh:
        fh.write(snapshot.to_json() + "\n")


def load_model(config, checkpoint_path, n_features):
    if config.model == "nn":
        sizes = [n_features, *config.baseline.hidden_layers, 1]
    else:
        sizes = [n_features + 2, *config.agent.hidden_layers, 2]
    net, adam, doc = checkpoint_load(checkpoint_path, expected_layer_sizes=sizes)
    head = doc.get("head", "q")
    if (head == "sigmoid") != (config.model == "nn"):
        raise ConfigError(f"checkpoint head {head!r} does not match model {config.model!r}")
    return TrainedModel(config, net, adam, doc.get("threshold"))


def save_evaluation(data, actions, report, trace, out_dir):
    _mkdir(out_dir)
    with open(os.path.join(out_dir, METRICS), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    write_trace(trace, os.path.join(out_dir, TRACE))
    with open(os.path.join(out_dir, ACTIONS), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "time", "amount", "label", "action"])
        for i in range(len(data)):
            w.writerow([i, float(data.times[i]), float(data.amounts[i]), int(data.labels[i]), int(actions[i])])


def run_train(config, out_dir, prepared=None):
    prepared = prepared or prepare(config.dataset)
    model = train_model(config, prepared)
    save_model(model, out_dir)
    return model, prepared


def run_eval(config, checkpoint_path, out_dir, prepared=None):
    prepared = prepared or prepare(config.dataset)
    model = load_model(config, checkpoint_path, prepared.test.n_features)
    actions, report, trace = evaluate_model(model, prepared.test)
    save_evaluation(prepared.test, actions, report, trace, out_dir)
    return report, trace, actions


def run_train_eval(config, out_dir=None, prepared=None):
    """Train then evaluate on the test split; writes artifacts when ``out_dir`` is given."""
    prepared = prepared or prepare(config.dataset)
    model = train_model(config, prepared)
    actions, report, trace = evaluate_model(model, prepared.test)
    if out_dir is not None:
        save_model(model, out_dir)
        save_evaluation(prepared.test, actions, report, trace, out_dir)
    return report, trace, model


def _dataset_key(config):
    return json.dumps(config.to_dict()["dataset"], sort_keys=True)


def _run_job(job):
    config_dict, out_dir = job
    config = config_from_dict(config_dict)
    report, _, _ = run_train_eval(config, out_dir)
    return report


def _map(jobs, n_jobs):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_run_job, jobs))
    cache = {}
    reports = []
    for cfg_dict, out_dir in jobs:
        cfg = config_from_dict(cfg_dict)
        key = _dataset_key(cfg)
        if key not in cache:
            cache[key] = prepare(cfg.dataset)
        reports.append(run_train_eval(cfg, out_dir, cache[key])[0])
    return reports


def run_compare(configs, out_dir, n_jobs=1):
    """Train and evaluate each config; one table row per model."""
    _mkdir(out_dir)
    labels = [c.label for c in configs]
    dirs = []
    seen = {}
    for label in labels:
        seen[label] = seen.get(label, 0) + 1
        safe = label.replace("'", "p")
        dirs.append(os.path.join(out_dir, safe if seen[label] == 1 else f"{safe}_{seen[label]}"))
    reports = _map([(c.to_dict(), d) for c, d in zip(configs, dirs)], n_jobs)
    rows = [table_row(label, r) for label, r in zip(labels, reports)]
    _write_rows(os.path.join(out_dir, COMPARE_CSV), TABLE_COLUMNS, rows)
    return rows


def replica_config(config, index):
    """Replica ``index`` of a run: seeds shifted by ``index`` (data seed too, if synthetic)."""
    changes = {"seed": config.seed + index}
    if config.dataset.source == "synthetic":
        changes["dataset.synth.seed"] = config.dataset.synth.seed + index
    return with_overrides(config, **changes)


def run_sweep_beta(config, betas, out_dir=None, replicas=1, n_jobs=1):
    """Seed-averaged DQN metrics for each beta.

    Within a replica every beta sees the same data and seed, so differences
    between rows come from beta alone.
    """
    if config.model != "dqn" or config.reward.kind != "combined":
        raise ConfigError("beta sweep needs model 'dqn' with the 'combined' reward")
    if not betas or replicas < 1:
        raise ConfigError("need at least one beta and one replica")
    jobs, keys = [], []
    for r in range(replicas):
        base = replica_config(config, r)
        for beta in betas:
            cfg = with_overrides(base, **{"reward.beta": float(beta)})
            run_dir = None if out_dir is None else os.path.join(out_dir, f"beta_{beta}_rep{r}")
            jobs.append((cfg.to_dict(), run_dir))
            keys.append((beta, r))
    reports = _map(jobs, n_jobs)
    per_run = []
    for (beta, r), rep in zip(keys, reports):
        per_run.append({"beta": beta, "replica": r, **{k: v for k, v in table_row("", rep).items() if k != "Model"}})
    rows = []
    for beta in betas:
        group = [p for p in per_run if p["beta"] == beta]
        row = {"beta": beta, "runs": len(group)}
        for col in ("Precision", "Recall", "F1", "App%", "F(bps)"):
            row[col] = float(np.mean([g[col] for g in group]))
        rows.append(row)
    if out_dir is not None:
        _mkdir(out_dir)
        _write_rows(os.path.join(out_dir, SWEEP_CSV), SWEEP_COLUMNS, rows)
        _write_rows(
            os.path.join(out_dir, "sweep_beta_runs.csv"),
            ["beta", "replica", *TABLE_COLUMNS[1:]],
            per_run,
        )
    return rows, per_run
