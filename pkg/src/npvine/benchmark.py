"""
Scenario benchmark runner.

A manifest lists scenarios, estimators and structure modes. For every
(scenario, replication) a true model, a training sample and an importance
sample are drawn from dedicated substreams of the master seed. Each
estimator is then fitted under each structure mode and scored. Work is
dispatched per (scenario, replication, estimator) to a process pool; results
depend only on the seed, never on the worker count or scheduling.
"""
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing

import numpy as np

from .evaluation import (STRUCTURE_MODES, AccuracyRecord, average_ranks, importance_sample,
                         measures_from_values, scenario_medians, timed, write_records)
from .simulation import EVALUATION, MODEL, SAMPLE, ScenarioConfig, draw_model, substream
from .vine import ESTIMATORS, fit_sequential, select_structure_and_fit

log = logging.getLogger(__name__)

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class ManifestError(ValueError):
    """Invalid benchmark manifest."""


@dataclass
class Manifest:
    scenarios: list
    estimators: list
    structure_modes: list = field(default_factory=lambda: list(STRUCTURE_MODES))
    seed: int = 0
    replications: int = 20
    n_eval: int = 1000
    estimator_options: dict = field(default_factory=dict)
    decay_from_zero: bool = False
    workers: int = 1

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ManifestError("manifest must be a JSON object")
        unknown = set(d) - {"scenarios", "estimators", "structure_modes", "seed", "replications",
                            "n_eval", "estimator_options", "decay_from_zero", "workers", "note"}
        if unknown:
            raise ManifestError(f"unknown manifest keys {sorted(unknown)}")
        try:
            seed = int(d.get("seed", 0))
            reps = int(d.get("replications", 20))
            scen = [ScenarioConfig.from_dict({"replications": reps, "seed": seed, **s})
                    for s in d.get("scenarios", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad scenario entry: {exc}") from None
        m = cls(scen, list(d.get("estimators", [])),
                list(d.get("structure_modes", STRUCTURE_MODES)), seed, reps,
                int(d.get("n_eval", 1000)), dict(d.get("estimator_options", {})),
                bool(d.get("decay_from_zero", False)), int(d.get("workers", 1)))
        m.validate()
        return m

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from None
        return cls.from_dict(d)

    def validate(self):
        if not self.scenarios:
            raise ManifestError("manifest lists no scenarios")
        if not self.estimators:
            raise ManifestError("manifest lists no estimators")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ManifestError(f"unknown estimators {bad}")
        if len(set(self.estimators)) != len(self.estimators):
            raise ManifestError("duplicate estimators")
        if not self.structure_modes:
            raise ManifestError("manifest lists no structure modes")
        bad = [m for m in self.structure_modes if m not in STRUCTURE_MODES]
        if bad:
            raise ManifestError(f"unknown structure modes {bad}")
        bad = [e for e in self.estimator_options if e not in ESTIMATORS]
        if bad:
            raise ManifestError(f"options given for unknown estimators {bad}")
        if self.replications < 1 or self.n_eval < 1 or self.workers < 1:
            raise ManifestError("replications, n_eval and workers must be positive")
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ManifestError("duplicate scenarios")

    def to_dict(self):
        return {"seed": self.seed, "replications": self.replications, "n_eval": self.n_eval,
                "scenarios": [{k: v for k, v in s.to_dict().items()
                               if k not in ("replications", "seed")} for s in self.scenarios],
                "estimators": self.estimators, "structure_modes": self.structure_modes,
                "estimator_options": self.estimator_options,
                "decay_from_zero": self.decay_from_zero, "workers": self.workers}


def replication_data(cfg, rep, n_eval, decay_from_zero=False):
    """Truth, training sample and importance sample for one replication."""
    truth = draw_model(cfg, substream(cfg.seed, cfg.name, rep, MODEL), decay_from_zero)
    train = truth.sample(cfg.n, substream(cfg.seed, cfg.name, rep, SAMPLE))
    isample = importance_sample(truth, n_eval, substream(cfg.seed, cfg.name, rep, EVALUATION))
    return truth, train, isample


def _nan_record(cfg, est, mode, rep):
    nan = float("nan")
    return AccuracyRecord(cfg.name, est, mode, rep, nan, nan, nan, nan, nan)


def run_task(cfg, rep, estimator, modes, n_eval, options=None, decay_from_zero=False):
    """Fit one estimator under each structure mode on one replication.

    Returns
    -------
    records : list of AccuracyRecord
    failures : list of str
    """
    records, failures = [], []
    try:
        truth, train, (U, c) = replication_data(cfg, rep, n_eval, decay_from_zero)
    except Exception as exc:
        msg = f"{cfg.name} rep {rep}: data generation failed: {exc}"
        return [_nan_record(cfg, estimator, m, rep) for m in modes], [msg]
    for mode in modes:
        try:
            if mode == "true":
                model, fit_s = timed(fit_sequential, train, truth.structure, estimator, options)
            else:
                model, fit_s = timed(select_structure_and_fit, train, estimator, mode, options)
            c_hat, eval_s = timed(model.pdf, U)
            iae, hel, kl = measures_from_values(c_hat, c)
            records.append(AccuracyRecord(cfg.name, estimator, mode, rep, iae, hel, kl,
                                          fit_s, eval_s))
            failures += [f"{cfg.name} rep {rep} {estimator}/{mode}: edge {e} fell back to "
                         "independence" for e in model.failures]
        except Exception as exc:
            failures.append(f"{cfg.name} rep {rep} {estimator}/{mode}: {type(exc).__name__}: {exc}")
            records.append(_nan_record(cfg, estimator, mode, rep))
    return records, failures


def _star(args):
    return run_task(*args)


def _tasks(manifest):
    for cfg in manifest.scenarios:
        for rep in range(cfg.replications):
            for est in manifest.estimators:
                yield (cfg, rep, est, tuple(manifest.structure_modes), manifest.n_eval,
                       manifest.estimator_options.get(est), manifest.decay_from_zero)


def run_benchmark(manifest, workers=None):
    """Execute every task of the manifest in a process pool.

    Worker processes use single-threaded linear algebra so that results do
    not depend on the worker count.

    Returns
    -------
    records : list of AccuracyRecord, sorted
    failures : list of str
    """
    workers = int(workers or manifest.workers)
    tasks = list(_tasks(manifest))
    saved = {k: os.environ.get(k) for k in _THREAD_VARS}
    os.environ.update({k: "1" for k in _THREAD_VARS})
    try:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_star, tasks))
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v
    records, failures = [], []
    for recs, fails in results:
        records += recs
        failures += fails
    for f in failures:
        log.warning(f)
    return sorted(records, key=AccuracyRecord.sort_key), failures


def summarize(records):
    """Average ranks, per-scenario medians and mean timings."""
    times = {}
    for r in records:
        if math.isfinite(r.fit_seconds):
            times.setdefault(f"{r.estimator}/{r.structure_mode}", []).append(r.fit_seconds)
    return {"average_ranks": average_ranks(records),
            "median_iae": {f"{s}/{e}": v for (s, e), v in scenario_medians(records).items()},
            "mean_fit_seconds": {k: float(np.mean(v)) for k, v in sorted(times.items())},
            "records": len(records)}


def write_outputs(out_dir, manifest, records, failures):
    os.makedirs(out_dir, exist_ok=True)
    write_records(os.path.join(out_dir, "results.csv"), records)
    summary = summarize(records)
    summary["failures"] = failures
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2)
    return summary


__all__ = ["Manifest", "ManifestError", "replication_data", "run_benchmark", "run_task",
           "summarize", "write_outputs"]
