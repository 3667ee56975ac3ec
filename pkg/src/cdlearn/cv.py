"""K-fold cross-validation of concentration-distribution predictors and report merging."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .core import Dataset, ValidationError
from .data import ProtocolPair, apparent_from_cd, format_float, hide_last_label, load_dataset
from .estimator import ConcentrationLearner, NoiseAppendBaseline, SoftmaxLDLRegressor
from .metrics import (BONFERRONI_DUNN_CD, LOWER_IS_BETTER, METRICS, friedman_statistic,
                      iman_davenport, metric_rows, rank_tables)
from .network import NetworkConfig

logger = logging.getLogger(__name__)

CDL_METHOD = "CDL-LD"
BASELINE_METHOD = "softmax-mlp+noise"
REPORT_COLUMNS = ("dataset", "method", "fold", *METRICS, "background_mae")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one cross-validation run.

    ``network`` holds the training hyperparameters; its input/output widths
    are filled in per dataset. ``protocol`` is ``"hide-last"`` (the last
    target column is an unseen background; training targets are the
    remaining columns renormalized) or ``"native-cd"`` (a concentration
    dataset whose training targets are the apparent label distributions
    ``b + mu / c``).
    """

    dataset_path: Optional[str] = None
    protocol: Literal["hide-last", "native-cd"] = "hide-last"
    network: dict = field(default_factory=dict)
    folds: int = 10
    master_seed: int = 0
    output_dir: Optional[str] = None
    baseline: bool = False
    n_jobs: int = 1

    def estimator_params(self) -> dict:
        defaults = NetworkConfig(input_dim=1, output_dim=1)
        allowed = {"hidden_dims", "hidden_activation", "optimizer", "learning_rate", "epochs",
                   "batch_size", "adam_beta1", "adam_beta2", "adam_eps", "weight_decay",
                   "early_stopping"}
        unknown = set(self.network) - allowed
        if unknown:
            raise ValidationError(f"unknown network options: {sorted(unknown)}")
        params = {k: getattr(defaults, k) for k in allowed}
        params["hidden_dims"] = None
        params.update(self.network)
        return params


@dataclass
class FoldResult:
    fold: int
    test_index: np.ndarray
    predictions: dict[str, np.ndarray]
    seconds: dict[str, float]


@dataclass
class CvReport:
    dataset: str
    protocol: str
    methods: tuple[str, ...]
    fold_index: list[np.ndarray]
    truth: np.ndarray
    predictions: dict[str, np.ndarray]
    per_fold: dict[str, dict[str, np.ndarray]]
    timing: dict[str, np.ndarray]

    def mean(self, method: str) -> dict[str, float]:
        return {k: float(np.mean(v)) for k, v in self.per_fold[method].items()}

    def std(self, method: str) -> dict[str, float]:
        """Population standard deviation over folds."""
        return {k: float(np.std(v)) for k, v in self.per_fold[method].items()}

    def to_tsv(self) -> str:
        """Per-fold rows, then ``mean`` and ``std`` rows, for every method."""
        buf = io.StringIO()
        buf.write("\t".join(REPORT_COLUMNS) + "\n")
        cols = (*METRICS, "background_mae")
        for method in self.methods:
            vals = self.per_fold[method]
            for f in range(len(self.fold_index)):
                buf.write("\t".join([self.dataset, method, str(f)] +
                                    [format_float(vals[k][f]) for k in cols]) + "\n")
            for label, agg in (("mean", self.mean(method)), ("std", self.std(method))):
                buf.write("\t".join([self.dataset, method, label] +
                                    [format_float(agg[k]) for k in cols]) + "\n")
        return buf.getvalue()

    def timing_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("dataset\tmethod\tfold\tseconds\n")
        for method in self.methods:
            for f, s in enumerate(self.timing[method]):
                buf.write(f"{self.dataset}\t{method}\t{f}\t{s:.3f}\n")
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"dataset {self.dataset} ({self.protocol}, {len(self.fold_index)} folds)",
                 "method".ljust(20) + "".join(m.rjust(22) for m in (*METRICS, "background_mae"))]
        for method in self.methods:
            mu, sd = self.mean(method), self.std(method)
            lines.append(method.ljust(20) + "".join(
                f"{mu[k]:.4f}+-{sd[k]:.4f}".rjust(22) for k in (*METRICS, "background_mae")))
        if self.protocol == "hide-last":
            lines.append("note: training targets are the visible labels renormalized to sum to one")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cv_report.tsv").write_text(self.to_tsv(), encoding="utf-8")
        (out / "cv_summary.txt").write_text(self.summary(), encoding="utf-8")
        (out / "timing.tsv").write_text(self.timing_tsv(), encoding="utf-8")


def fold_partition(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle, then contiguous chunks whose sizes differ by at most one."""
    if folds < 2 or folds > n:
        raise ValidationError(f"fold count must be in [2, n={n}], got {folds}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, folds)]


def fold_seed(master_seed: int, fold: int) -> int:
    """Independent per-fold seed; identical regardless of how folds are scheduled."""
    return int(np.random.SeedSequence([master_seed, fold]).generate_state(1)[0])


def protocol_targets(dataset: Dataset, protocol: str) -> ProtocolPair:
    if protocol == "hide-last":
        return hide_last_label(dataset.targets)
    if protocol == "native-cd":
        if dataset.kind != "cdl":
            raise ValidationError("the native-cd protocol needs a concentration (cdl) dataset")
        return apparent_from_cd(dataset.targets)
    raise ValidationError(f"unknown protocol {protocol!r}")


def _run_fold(fold: int, train_idx, test_idx, X, pair: ProtocolPair, params: dict,
              master_seed: int, baseline: bool) -> FoldResult:
    seed = fold_seed(master_seed, fold)
    Ytr = pair.train_targets[train_idx]
    preds, secs = {}, {}

    t0 = time.perf_counter()
    est = ConcentrationLearner(random_state=seed, **params).fit(X[train_idx], Ytr)
    preds[CDL_METHOD] = est.predict(X[test_idx])
    secs[CDL_METHOD] = time.perf_counter() - t0

    if baseline:
        t0 = time.perf_counter()
        base = NoiseAppendBaseline(SoftmaxLDLRegressor(random_state=seed, **params),
                                   random_state=seed + 1)
        base.fit(X[train_idx], Ytr)
        preds[BASELINE_METHOD] = base.predict(X[test_idx], pair.eval_targets[test_idx, -1])
        secs[BASELINE_METHOD] = time.perf_counter() - t0
    return FoldResult(fold, test_idx, preds, secs)


def run_cv(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> CvReport:
    """Cross-validate the evidential model (and optionally the naive baseline).

    Predictions are concentration distributions compared against the
    protocol's ground truth. Deterministic given ``config.master_seed``.
    """
    if dataset is None:
        if config.dataset_path is None:
            raise ValidationError("no dataset given")
        dataset = load_dataset(config.dataset_path)
    pair = protocol_targets(dataset, config.protocol)
    params = config.estimator_params()
    parts = fold_partition(dataset.n, config.folds, config.master_seed)
    X = dataset.features
    all_idx = np.arange(dataset.n)

    args = [(f, np.setdiff1d(all_idx, test), test, X, pair, params, config.master_seed,
             config.baseline) for f, test in enumerate(parts)]
    if config.n_jobs == 1:
        results = [_run_fold(*a) for a in args]
    else:
        results = Parallel(n_jobs=config.n_jobs)(delayed(_run_fold)(*a) for a in args)

    methods = (CDL_METHOD,) + ((BASELINE_METHOD,) if config.baseline else ())
    truth = pair.eval_targets
    predictions = {m: np.empty_like(truth) for m in methods}
    per_fold = {m: {k: np.empty(len(parts)) for k in (*METRICS, "background_mae")} for m in methods}
    timing = {m: np.empty(len(parts)) for m in methods}
    for res in results:
        for m in methods:
            P = res.predictions[m]
            predictions[m][res.test_index] = P
            T = truth[res.test_index]
            for k, v in metric_rows(T, P).items():
                per_fold[m][k][res.fold] = np.mean(v)
            per_fold[m]["background_mae"][res.fold] = np.mean(np.abs(P[:, -1] - T[:, -1]))
            timing[m][res.fold] = res.seconds[m]
        logger.info("fold %d done", res.fold)

    report = CvReport(dataset.name or "dataset", config.protocol, methods, parts, truth,
                      predictions, per_fold, timing)
    if config.output_dir:
        report.write(config.output_dir)
    return report


# Merging reports across datasets

def read_report_means(paths: Sequence) -> tuple[list[str], list[str], dict[str, np.ndarray]]:
    """Collect ``mean`` rows from cv_report.tsv files into ``(N, k)`` matrices.

    Every dataset must report every method.
    """
    table: dict[tuple[str, str], dict[str, float]] = {}
    datasets: list[str] = []
    methods: list[str] = []
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"no such report: {path}")
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            missing = set(REPORT_COLUMNS[:3]) | set(METRICS)
            missing -= set(reader.fieldnames or ())
            if missing:
                raise ValidationError(f"{path}: missing report columns {sorted(missing)}")
            for row in reader:
                if row["fold"] != "mean":
                    continue
                key = (row["dataset"], row["method"])
                if key in table:
                    raise ValidationError(f"{path}: duplicate entry for dataset {key[0]!r}, method {key[1]!r}")
                try:
                    table[key] = {m: float(row[m]) for m in METRICS}
                except ValueError as exc:
                    raise ValidationError(f"{path}: {exc}") from None
                if key[0] not in datasets:
                    datasets.append(key[0])
                if key[1] not in methods:
                    methods.append(key[1])
    for d in datasets:
        for m in methods:
            if (d, m) not in table:
                raise ValidationError(f"dataset {d!r} has no result for method {m!r}")
    means = {metric: np.array([[table[(d, m)][metric] for m in methods] for d in datasets])
             for metric in METRICS}
    return datasets, methods, means


@dataclass
class MergedReport:
    datasets: list[str]
    methods: list[str]
    means: dict[str, np.ndarray]
    ranks: dict
    chi2: dict[str, float]
    f_id: dict[str, float]

    def ranks_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("metric\tdataset\t" + "\t".join(self.methods) + "\n")
        for metric, table in self.ranks.items():
            for d, row in zip(self.datasets, table.ranks):
                buf.write(f"{metric}\t{d}\t" + "\t".join(format_float(r) for r in row) + "\n")
            buf.write(f"{metric}\taverage\t" +
                      "\t".join(format_float(r) for r in table.average_ranks) + "\n")
        return buf.getvalue()

    def friedman_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("# friedman_chi2 is the value conventionally tabulated as F_F; "
                  "iman_davenport_F is the F-distributed variant\n")
        buf.write(f"# N={len(self.datasets)} k={len(self.methods)} "
                  f"bonferroni_dunn_cd={BONFERRONI_DUNN_CD}\n")
        buf.write("metric\tfriedman_chi2\timan_davenport_F\n")
        for metric in self.chi2:
            buf.write(f"{metric}\t{format_float(self.chi2[metric])}\t{format_float(self.f_id[metric])}\n")
        return buf.getvalue()

    def series_tsv(self) -> str:
        """Long-format average ranks, one row per (metric, method), ready to plot."""
        buf = io.StringIO()
        buf.write("metric\tmethod\taverage_rank\tlower_is_better\n")
        for metric, table in self.ranks.items():
            for method, r in zip(self.methods, table.average_ranks):
                buf.write(f"{metric}\t{method}\t{format_float(r)}\t{int(LOWER_IS_BETTER[metric])}\n")
        return buf.getvalue()

    def summary(self) -> str:
        width = max(10, *(len(m) + 2 for m in self.methods))
        lines = ["average ranks (lower is better)", "metric".ljust(12) +
                 "".join(m.rjust(width) for m in self.methods) + "chi2_F".rjust(12)]
        for metric, table in self.ranks.items():
            row = metric.ljust(12) + "".join(f"{r:.2f}".rjust(width) for r in table.average_ranks)
            chi2 = self.chi2.get(metric)
            lines.append(row + (f"{chi2:.4f}".rjust(12) if chi2 is not None else ""))
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ranks.tsv").write_text(self.ranks_tsv(), encoding="utf-8")
        (out / "friedman.tsv").write_text(self.friedman_tsv(), encoding="utf-8")
        (out / "rank_series.tsv").write_text(self.series_tsv(), encoding="utf-8")
        (out / "report.txt").write_text(self.summary(), encoding="utf-8")


def merge_reports(paths: Sequence) -> MergedReport:
    datasets, methods, means = read_report_means(paths)
    if len(methods) < 2:
        raise ValidationError("ranking needs at least two methods")
    ranks = rank_tables(means, methods, datasets)
    N, k = len(datasets), len(methods)
    chi2, f_id = {}, {}
    if N >= 2:
        for metric, table in ranks.items():
            chi2[metric] = friedman_statistic(table.average_ranks, N, k)
            f_id[metric] = iman_davenport(table.average_ranks, N, k)
    return MergedReport(datasets, methods, means, ranks, chi2, f_id)

