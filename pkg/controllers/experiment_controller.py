# experiment_controller.py

import functools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from models.bound import BoundInputs
from models.errors import DataError, InvalidArgumentError
from models.features import ShadowPlan, expected_noise_floor
from models.krr_model import KrrModel, MaternParams
from models.pauli import ObservableSet
from models.projector import JlProjector
from models.reservoir import ReservoirConfig
from models.run_config import VERSION, RunConfig
from models.window_dataset import WindowDataset
from services.bound_service import beta_from_geometric, bound_grid
from services.data_service import label_bound, make_varma, series_hash, simulate, split_windows
from services.kernel_service import TuneResult, krr_fit, krr_predict, mse, rkhs_norm, tune
from services.measurement_service import InjectivityReport, estimate_features, exact_features, injectivity_audit
from services.projection_service import make_projector
from services.reservoir_service import build_entangler, embed_multiplexed
from utils.file_handler import (content_hash, ensure_dir, load_manifest, load_matrix, read_csv, read_json,
                                save_matrix, update_manifest, write_csv, write_json, MANIFEST_NAME)
from utils.seeding import PROJECTOR_STREAM, SHADOW_STREAM, derive_seed, make_rng

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")

BOUND_HEADER = [
    "task", "N", "w", "g", "Lambda", "Upsilon_Y", "nu", "xi", "R", "n_obs", "lambda_star", "delta", "beta_g",
    "delta_prime", "rademacher", "mixing", "truncation", "total", "vacuous",
    "train_mse", "test_mse", "observed_gap", "status",
]


def _embed_chunk(job: Tuple) -> np.ndarray:
    """
    Embeds a contiguous run of windows; kept at module level so process pools can pickle it.
    """
    windows, start, split_index, reservoir_dict, projector_dict, backend, plan_dict, master_seed = job
    config = ReservoirConfig.from_dict(reservoir_dict)
    projector = JlProjector.from_dict(projector_dict)
    plan = ShadowPlan(plan_dict["total_snapshots"], groups=plan_dict["groups"], k=plan_dict["k"])
    observables = ObservableSet(config.n, plan.k)
    entanglers = [build_entangler(sub, config.topology) for sub in config.subs]

    rows = []
    for offset, window in enumerate(windows):
        states = embed_multiplexed(window, config, projector, entanglers)
        if backend == "exact":
            features = exact_features(states, observables)
        else:
            streams = [make_rng(master_seed, SHADOW_STREAM, split_index, start + offset, r) for r in range(config.R)]
            features = estimate_features(states, observables, plan, streams)
        rows.append(features.values)
    return np.stack(rows)


def fit_inverse_sqrt(sizes: Sequence[int], values: Sequence[float]) -> Tuple[float, float, float]:
    """
    Least-squares fit values ~ a + c / sqrt(N).

    :return: (a, c, r2)
    """
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.shape[0] < 2:
        raise InvalidArgumentError("The 1/sqrt(N) fit needs at least two sample sizes.")
    design = np.column_stack([np.ones_like(sizes), 1.0 / np.sqrt(sizes)])
    (a, c), *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = values - design @ np.array([a, c])
    spread = float(np.sum((values - values.mean()) ** 2))
    r2 = 1.0 - float(residual @ residual) / spread if spread > 0.0 else 1.0
    return float(a), float(c), r2


def _timed(command):
    @functools.wraps(command)
    def wrapper(self, *args, **kwargs):
        logger.info("%s started", command.__name__)
        start = time.perf_counter()
        result = command(self, *args, **kwargs)
        elapsed = time.perf_counter() - start
        update_manifest(self.output_dir, timings={command.__name__: round(elapsed, 3)})
        logger.info("%s finished in %.2fs", command.__name__, elapsed)
        return result
    return wrapper


@dataclass
class EmbedSummary:
    hits: int
    misses: int
    audit: InjectivityReport

    @property
    def hit_rate(self) -> float:
        return self.hits / (self.hits + self.misses)


class ExperimentController:
    """
    Runs the pipeline stages against one output directory. Every stage reads what earlier
    stages wrote there, so the commands can run in separate processes.
    """

    def __init__(self, config: RunConfig, show: bool = False):
        """
        :param config: The run configuration.
        :param show: Print the audit, bound and window tables to stdout as the stages finish.
        """
        self.config = config
        self.show = show
        self.output_dir = config.output_dir
        self.reservoir = config.reservoir.build(config.seed)
        self.projector = make_projector(config.reservoir.n, config.data.d, derive_seed(config.seed, PROJECTOR_STREAM))
        self.observables = ObservableSet(config.reservoir.n, config.measurement.k)
        self._splits: Dict[str, Dict[str, WindowDataset]] = {}

    # --- file plumbing -------------------------------------------------------------------

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]):
        write_csv(self._path(name), header, rows, f"config_hash={self.config.config_hash()}")

    def _manifest(self) -> Dict[str, Any]:
        manifest = load_manifest(self.output_dir)
        if "data" not in manifest:
            raise DataError(f"No generated dataset in '{self.output_dir}'; run generate first.")
        if manifest.get("config_hash") != self.config.config_hash():
            logger.warning("Configuration differs from the one recorded in %s.", MANIFEST_NAME)
        return manifest

    def _load_series(self, manifest: Dict[str, Any]) -> np.ndarray:
        _, rows = read_csv(self._path("series.csv"))
        series = np.array([[float(value) for value in row[1:]] for row in rows])
        if series_hash(series) != manifest["data"]["series_hash"]:
            raise DataError("series.csv does not match the hash recorded in the manifest.")
        return series

    def _load_split(self, split: str, series: np.ndarray) -> Dict[str, WindowDataset]:
        """
        Rebuilds one dataset per task from the window index ranges and stored labels.
        """
        header, rows = read_csv(self._path(f"windows_{split}.csv"))
        w, s = self.config.data.w, self.config.data.s
        ends = np.array([int(row[2]) for row in rows], dtype=np.int64)
        windows = np.stack([series[end - w + 1:end + 1] for end in ends])
        source = series_hash(series)
        datasets = {}
        for task in self.config.data.tasks:
            column = f"label_{task}"
            if column not in header:
                raise DataError(f"windows_{split}.csv has no labels for task '{task}'.")
            labels = np.array([float(row[header.index(column)]) for row in rows])
            datasets[task] = WindowDataset(windows, labels, w, s, ends, source, task)
        return datasets

    def _features(self, split: str) -> np.ndarray:
        entry = load_manifest(self.output_dir).get("cache", {}).get(f"features_{split}")
        if entry is None:
            raise DataError(f"No cached {split} features in '{self.output_dir}'; run embed first.")
        if entry["backend"] != self.config.measurement.backend:
            raise DataError(f"Cached {split} features use the {entry['backend']} backend; run embed again.")
        return load_matrix(self._path(f"features_{split}.bin"), entry["sha256"])

    def _split(self, split: str) -> Dict[str, WindowDataset]:
        if not self._splits:
            series = self._load_series(self._manifest())
            self._splits = {name: self._load_split(name, series) for name in SPLITS}
        return self._splits[split]

    def _task_data(self, task: str, n_train: int):
        train, test = self._split("train")[task], self._split("test")[task]
        features_train, features_test = self._features("train"), self._features("test")
        if n_train > train.N:
            raise DataError(f"Requested {n_train} training windows, only {train.N} were generated.")
        return (features_train[:n_train], train.labels[:n_train], train.prefix(n_train),
                features_test, test.labels)

    def _tune_windows(self) -> int:
        windows = self.config.kernel.tune_windows or self.config.data.n_train_max
        if windows > self.config.data.n_train_max:
            raise DataError(f"kernel.tune_windows={windows} exceeds the {self.config.data.n_train_max} "
                            f"generated training windows.")
        return windows

    def fit_readout(self, task: str, lambda_reg: float, n_train: int) -> Tuple[KrrModel, float, float]:
        """
        Fits the readout of a task on the first n_train windows with the selected kernel.

        :return: (model, train_mse, test_mse)
        """
        features, labels, _, features_test, labels_test = self._task_data(task, n_train)
        model = krr_fit(self._matern(task), lambda_reg, features, labels, regularizer=self.config.readout.regularizer)
        return (model, mse(labels, krr_predict(model, features)),
                mse(labels_test, krr_predict(model, features_test)))

    def load_model(self, task: str) -> KrrModel:
        """
        Reads model_<task>.json back; the support must still be the cached training features.
        """
        data = read_json(self._path(f"model_{task}.json"))
        features_key = load_manifest(self.output_dir).get("cache", {}).get("features_train", {}).get("key")
        if data.get("support_key") != features_key:
            raise DataError(f"model_{task}.json was fitted on other training features; run bound again.")
        return KrrModel.from_dict(data, self._features("train"))

    # --- commands ------------------------------------------------------------------------

    @_timed
    def cmd_generate(self) -> Dict[str, Tuple[WindowDataset, WindowDataset]]:
        """
        Simulates the VARMA series, cuts the train/test windows and labels them for every task.
        """
        data = self.config.data
        self._splits = {}
        ensure_dir(self.output_dir)
        spec = data.varma_spec(self.config.seed)
        model = make_varma(spec)
        series = simulate(model, spec)

        functionals = {task: data.functional(task, self.config.seed) for task in data.tasks}
        reserve = max(functional.future_points for functional in functionals.values())
        splits = {
            task: split_windows(series, functional, data.w, data.s, data.n_train_max, data.n_test, reserve)
            for task, functional in functionals.items()
        }

        self._write_csv("series.csv", ["t"] + [f"x{j}" for j in range(data.d)],
                        [[t] + [float(value) for value in row] for t, row in enumerate(series)])
        for index, split in enumerate(SPLITS):
            base = splits[data.tasks[0]][index]
            rows = [[i, int(end) - data.w + 1, int(end)] + [float(splits[task][index].labels[i]) for task in data.tasks]
                    for i, end in enumerate(base.end_indices)]
            self._write_csv(f"windows_{split}.csv", ["window_id", "start", "end"] + [f"label_{t}" for t in data.tasks],
                            rows)

        train_range = splits[data.tasks[0]][0].time_range()
        test_range = splits[data.tasks[0]][1].time_range()
        manifest = {
            "version": VERSION,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "cache": load_manifest(self.output_dir).get("cache", {}),
            "seeds": {
                "master": self.config.seed,
                "varma": spec.seed,
                "projector": self.projector.seed,
                "sub_reservoirs": [sub.seed for sub in self.reservoir.subs],
                "functionals": self.config.task_seeds(),
            },
            "reservoir": self.reservoir.to_dict(),
            "projector": self.projector.to_dict(),
            "data": {
                "series_hash": series_hash(series),
                "length": int(series.shape[0]),
                "varma": spec.to_dict(),
                "spectral_norm_sum": model.spectral_norm_sum(),
                "companion_radius": model.spectral_radius(),
                "w": data.w, "s": data.s, "g": data.s - data.w,
                "n_train": data.n_train_max, "n_test": data.n_test,
                "train_range": list(train_range), "test_range": list(test_range),
                "functionals": {task: functional.to_dict() for task, functional in functionals.items()},
                "upsilon": {task: max(train.upsilon, test.upsilon) for task, (train, test) in splits.items()},
                "label_bound": {task: label_bound(functional, data.w) for task, functional in functionals.items()},
            },
        }
        write_json(self._path(MANIFEST_NAME), manifest)
        logger.info("Generated %d train and %d test windows (train %s, test %s)",
                    data.n_train_max, data.n_test, train_range, test_range)
        if self.show:
            splits[data.tasks[0]][0].prefix(min(10, data.n_train_max)).pretty_print()
        return splits

    def _embed(self, windows: np.ndarray, split_index: int) -> np.ndarray:
        measurement = self.config.measurement
        workers = self.config.workers
        chunk = max(1, math.ceil(len(windows) / (workers * 4)))
        reservoir_dict = self.reservoir.to_dict(include_angles=True)
        jobs = [
            (windows[start:start + chunk], start, split_index, reservoir_dict, self.projector.to_dict(),
             measurement.backend, measurement.plan().to_dict(), self.config.seed)
            for start in range(0, len(windows), chunk)
        ]
        blocks = []
        with tqdm(total=len(windows), desc=f"embed {SPLITS[split_index]}", unit="window",
                  disable=not self.config.progress) as bar:
            if workers == 1:
                results = map(_embed_chunk, jobs)
                for block in results:
                    blocks.append(block)
                    bar.update(len(block))
            else:
                with ProcessPoolExecutor(max_workers=workers) as executor:
                    # map preserves job order, so the merge is deterministic
                    for block in executor.map(_embed_chunk, jobs):
                        blocks.append(block)
                        bar.update(len(block))
        return np.concatenate(blocks)

    @_timed
    def cmd_embed(self) -> EmbedSummary:
        """
        Computes (or reuses) the feature matrices of both splits and audits the training
        features for collisions.
        """
        manifest = self._manifest()
        measurement = self.config.measurement
        if measurement.backend == "shadows":
            logger.info("Shadow plan %r; per-group noise floor for weight-%d strings: %.3f",
                        measurement.plan(), measurement.k, expected_noise_floor(measurement.plan(), measurement.k))

        hits = misses = 0
        cache = manifest.get("cache", {})
        for split_index, split in enumerate(SPLITS):
            base = next(iter(self._split(split).values()))
            key = content_hash({
                "series": manifest["data"]["series_hash"],
                "ends": base.end_indices.tolist(),
                "w": base.w,
                "reservoir": self.reservoir.to_dict(include_angles=True),
                "projector": self.projector.to_dict(),
                "k": measurement.k,
                "backend": measurement.backend,
                "shadows": [measurement.plan().to_dict(), self.config.seed] if measurement.backend == "shadows" else None,
            })
            name = f"features_{split}"
            entry = cache.get(name)
            if entry is not None and entry.get("key") == key and os.path.exists(self._path(f"{name}.bin")):
                load_matrix(self._path(f"{name}.bin"), entry["sha256"])
                hits += 1
                logger.info("Cache hit for %s", name)
                continue
            misses += 1
            logger.info("Cache miss for %s; embedding %d windows", name, base.N)
            matrix = self._embed(base.windows, split_index)
            digest = save_matrix(self._path(f"{name}.bin"), matrix)
            cache[name] = {"key": key, "sha256": digest, "backend": measurement.backend,
                           "rows": int(matrix.shape[0]), "cols": int(matrix.shape[1])}
            update_manifest(self.output_dir, cache={name: cache[name]})

        audit = injectivity_audit(self._features("train")[:self.config.data.n_train], tol=measurement.audit_tol)
        update_manifest(self.output_dir, audit={
            "windows": self.config.data.n_train, "min_pairwise_distance": audit.min_pairwise_distance,
            "collisions": len(audit.collisions), "tol": audit.tol, "injective": audit.injective,
        })
        if self.show:
            audit.pretty_print()
        summary = EmbedSummary(hits, misses, audit)
        logger.info("Cache hits: %d/%d (%.0f%%)", hits, hits + misses, 100.0 * summary.hit_rate)
        return summary

    @_timed
    def cmd_tune(self) -> Dict[str, TuneResult]:
        """
        Tunes (nu, xi) per task once on the training pool and records the selection; every
        later fit of the task reuses it.
        """
        cfg = self.config.kernel.tuner_config()
        windows = self._tune_windows()
        features_key = load_manifest(self.output_dir).get("cache", {}).get("features_train", {}).get("key")
        results, rows, selections = {}, [], {}
        for task in self.config.data.tasks:
            features, labels, _, _, _ = self._task_data(task, windows)
            result = tune(cfg, features, labels)
            results[task] = result
            rows.extend([task, trial.nu, trial.xi, trial.val_mse] for trial in result.trials)
            selections[task] = {"nu": result.params.nu, "xi": result.params.xi, "val_mse": result.val_mse,
                                "features_key": features_key, "windows": windows}
            logger.info("%s: selected %r (validation MSE %.4e)", task, result.params, result.val_mse)
        self._write_csv("trials.csv", ["task", "nu", "xi", "val_mse"], rows)
        update_manifest(self.output_dir, kernel=selections)
        return results

    def _matern(self, task: str) -> MaternParams:
        """
        Fixed kernel from the config, else the tuned one; tunes first when no valid selection exists.
        """
        kernel = self.config.kernel
        if not kernel.tune:
            return kernel.fixed()
        manifest = load_manifest(self.output_dir)
        selection = manifest.get("kernel", {}).get(task)
        features_key = manifest.get("cache", {}).get("features_train", {}).get("key")
        if (selection is None or selection.get("features_key") != features_key
                or selection.get("windows") != self._tune_windows()):
            logger.info("No kernel selection for the current features; tuning first.")
            self.cmd_tune()
            selection = load_manifest(self.output_dir)["kernel"][task]
        return MaternParams(selection["nu"], selection["xi"])

    @_timed
    def cmd_sweep_reg(self) -> List[List[Any]]:
        """
        Fits the readout over the regularization grid; also writes the predicted-vs-true table
        at the smallest grid value.
        """
        readout = self.config.readout
        grid = sorted(readout.grid)
        rows, fit_rows, interpolation = [], [], {}
        for task in self.config.data.tasks:
            params = self._matern(task)
            features, labels, train, features_test, labels_test = self._task_data(task, self.config.data.n_train)
            for index, lambda_reg in enumerate(grid):
                model = krr_fit(params, lambda_reg, features, labels, regularizer=readout.regularizer)
                predicted = krr_predict(model, features)
                train_mse = mse(labels, predicted)
                rows.append([task, lambda_reg, train_mse,
                             mse(labels_test, krr_predict(model, features_test)), rkhs_norm(model)])
                if index == 0:
                    fit_rows.extend([task, i, int(end), float(y), float(p)]
                                    for i, (end, y, p) in enumerate(zip(train.end_indices, labels, predicted)))
                    variance = float(np.var(labels))
                    interpolation[task] = {"lambda_reg": lambda_reg, "train_mse": train_mse, "label_var": variance,
                                           "relative": train_mse / variance if variance > 0.0 else 0.0}
                    logger.info("%s: train MSE %.3e at lambda_reg=%.1e (%.3e of the label variance)",
                                task, train_mse, lambda_reg, interpolation[task]["relative"])
        self._write_csv("sweep_reg.csv", ["task", "lambda_reg", "train_mse", "test_mse", "rkhs_norm"], rows)
        self._write_csv("fit_table.csv", ["task", "window_id", "end", "y_true", "y_pred"], fit_rows)
        update_manifest(self.output_dir, interpolation=interpolation)
        return rows

    @_timed
    def cmd_sweep_n(self) -> List[List[Any]]:
        """
        Trains on nested chronological prefixes of the training windows and scores each on
        the fixed test set; writes the a + c / sqrt(N) trend per task.
        """
        readout = self.config.readout
        rows, trend_rows = [], []
        for task in self.config.data.tasks:
            params = self._matern(task)
            features, labels, _, features_test, labels_test = self._task_data(task, self.config.data.n_train_max)
            sizes, test_errors = [], []
            for N in self.config.data.n_grid:
                model = krr_fit(params, readout.lambda_reg, features[:N], labels[:N], regularizer=readout.regularizer)
                test_mse = mse(labels_test, krr_predict(model, features_test))
                rows.append([task, N, mse(labels[:N], krr_predict(model, features[:N])), test_mse])
                sizes.append(N)
                test_errors.append(test_mse)
            if len(sizes) >= 2:
                trend_rows.append([task, *fit_inverse_sqrt(sizes, test_errors)])
        self._write_csv("sweep_n.csv", ["task", "N", "train_mse", "test_mse"], rows)
        self._write_csv("sweep_n_fit.csv", ["task", "a", "c", "r2"], trend_rows)
        return rows

    @_timed
    def cmd_bound(self) -> List[List[Any]]:
        """
        Evaluates the generalization bound next to the observed train/test gap of each task.
        Invalid inputs (nu <= 1, too few windows) yield a 'refused' row instead of an error.
        """
        data, settings = self.config.data, self.config.bound
        manifest = self._manifest()
        N = data.n_train - data.n_train % 2
        g = data.s - data.w
        beta_g = settings.beta_g if settings.beta0 is None else beta_from_geometric(settings.beta0, settings.beta1, g)

        features_key = manifest.get("cache", {}).get("features_train", {}).get("key")
        rows = []
        for task in data.tasks:
            params = self._matern(task)
            model, train_mse, test_mse = self.fit_readout(task, self.config.readout.lambda_reg, N)
            write_json(self._path(f"model_{task}.json"), {"task": task, **model.to_dict(support_key=features_key)})
            gap = abs(test_mse - train_mse)
            Lambda = settings.Lambda if settings.Lambda is not None else rkhs_norm(model)
            upsilon = settings.Upsilon_Y if settings.Upsilon_Y is not None else manifest["data"]["upsilon"][task]
            head = [task, N, data.w, g, Lambda, upsilon, params.nu, params.xi, self.reservoir.R,
                    len(self.observables), self.reservoir.lambda_star, settings.delta, beta_g]
            try:
                base = BoundInputs(N=N, w=data.w, g=g, Lambda=Lambda, Upsilon_Y=upsilon, nu=params.nu, xi=params.xi,
                                   R=self.reservoir.R, n_obs=len(self.observables),
                                   lambda_star=self.reservoir.lambda_star, delta=settings.delta, beta_g=beta_g)
            except InvalidArgumentError as error:
                logger.warning("Bound refused for %s: %s", task, error)
                rows.append(head + [""] * 6 + [train_mse, test_mse, gap, "refused"])
                continue
            for inputs, report in bound_grid(base, {"w": settings.w_grid or (data.w,)}):
                status = "vacuous" if report.vacuous else ("ok" if report.total >= gap else "violated")
                rows.append(head[:2] + [inputs.w] + head[3:] + [
                    report.delta_prime, report.rademacher_term, report.mixing_penalty, report.truncation_term,
                    report.total, report.vacuous, train_mse, test_mse, gap, status])
                logger.info("%s (w=%d): bound total %.4g vs observed gap %.3e", task, inputs.w, report.total, gap)
                if self.show:
                    print(f"{task} (w={inputs.w}, observed gap {gap:.6g})")
                    report.pretty_print()
        self._write_csv("bound.csv", BOUND_HEADER, rows)
        return rows

    def cmd_all(self):
        """
        generate, embed, tune, sweep-reg, sweep-n and bound in sequence.
        """
        self.cmd_generate()
        self.cmd_embed()
        if self.config.kernel.tune:
            self.cmd_tune()
        self.cmd_sweep_reg()
        self.cmd_sweep_n()
        self.cmd_bound()

    def draw_topology(self) -> str:
        """
        Renders the coupling graph of the reservoirs next to the run outputs.
        """
        ensure_dir(self.output_dir)
        filename = self._path("topology")
        if self.show:
            self.reservoir.topology.pretty_print_edges()
        self.reservoir.topology.visualize(filename=filename)
        return filename + ".png"
