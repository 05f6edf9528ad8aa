"""Command-line entry point: the full pipeline as subcommands.

Exit codes: 0 success, 1 usage error, 2 data/runtime error. Expected
failures print a one-line message, never a stack trace. Every command
writes its artifacts plus a manifest.json (version, config digest, master
seed, wall time) into the output directory; all artifacts other than the
manifest are byte-identical across reruns with the same inputs and seeds.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .classifiers import DEFAULTS, FAMILIES, ModelSpec, model_to_json, train
from .errors import StrokelabError
from .experiments import (
    AblationResult,
    ExperimentConfig,
    FeatureSet,
    RunResult,
    ablation_add,
    ablation_remove,
    run_benchmark,
)
from .ingest import (
    EncodedMatrix,
    load_dataset,
    records_to_csv,
    synthesize,
)
from .metrics import histogram_bins
from .pca import biplot_coords, fit_pca, loadings_report, scree_data, transform
from .sampling import SplitSpec, balanced_downsample
from .stats import auc_importance, chads2_analysis, correlation_matrix

ENV_OUTPUT_DIR = "STROKELAB_OUTPUT_DIR"

_DEFAULTS = {
    "output_dir": None,
    "config": None,
    "seed": 42,
    "runs": 100,
    "train_fraction": 0.70,
    "model": "mlp",
    "features": "all",
    "metrics_mode": "positive",
    "threads": 1,
    "pca_global": False,
    "balanced": False,
    "no_stratify": False,
    "mode": "add",
    "n": 1000,
    "balance": 0.05,
    "age_threshold": 75.0,
    "glucose_threshold": 200.0,
}


class _Parser(argparse.ArgumentParser):
    """argparse with the documented exit-code contract (usage errors -> 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="strokelab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"strokelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str, needs_input: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if needs_input:
            p.add_argument("--input", required=True, help="path to the EHR CSV")
        p.add_argument(
            "--output-dir",
            default=argparse.SUPPRESS,
            help=f"artifact directory (default: ${ENV_OUTPUT_DIR} or ./strokelab-out)",
        )
        p.add_argument(
            "--config",
            default=argparse.SUPPRESS,
            help="JSON (or TOML, Python >= 3.11) config file merged beneath flags",
        )
        return p

    add("inspect", "parse and summarize a dataset; report encoding and row issues")

    add("correlate", "write the feature correlation matrix as CSV")

    add("importance", "rank features by folded AUC against the stroke label")

    p = add("chads2", "CHADS2 score histogram and per-score stroke proportions")
    p.add_argument("--age-threshold", type=float, default=argparse.SUPPRESS,
                   help="age point threshold (default: 75)")
    p.add_argument("--glucose-threshold", type=float, default=argparse.SUPPRESS,
                   help="diabetes proxy glucose threshold, mg/dL (default: 200)")

    p = add("pca", "fit PCA; write scree, loadings, biplot, and score CSVs")
    p.add_argument("--balanced", action="store_true", default=argparse.SUPPRESS,
                   help="downsample to class balance before fitting (default: off)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="downsampling seed (default: 42)")

    p = add("train", "train one model on the dataset and save it as JSON")
    _model_flags(p)
    p.add_argument("--balanced", action="store_true", default=argparse.SUPPRESS,
                   help="downsample to class balance before training (default: off)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="sampling/training seed (default: 42)")

    p = add("benchmark", "repeated seeded downsampling experiments for one model")
    _model_flags(p)
    _experiment_flags(p)

    p = add("ablate", "add-one or remove-one feature study over full benchmarks")
    p.add_argument("--mode", choices=("add", "remove"), default=argparse.SUPPRESS,
                   help="ablation direction (default: add)")
    _model_flags(p)
    _experiment_flags(p)

    p = add("synth", "generate a synthetic cohort CSV", needs_input=False)
    p.add_argument("--n", type=int, default=argparse.SUPPRESS,
                   help="number of records (default: 1000)")
    p.add_argument("--balance", type=float, default=argparse.SUPPRESS,
                   help="positive label fraction (default: 0.05)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="generator seed (default: 42)")
    return parser


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=FAMILIES, default=argparse.SUPPRESS,
                   help="classifier family (default: mlp)")
    p.add_argument("--features", default=argparse.SUPPRESS,
                   help="all | top4 | custom:<a,b,...> | pc:<k> (default: all)")
    p.add_argument("--pca-global", action="store_true", default=argparse.SUPPRESS,
                   help="fit pc:<k> projections on the full dataset instead of "
                        "the train fold (default: off)")


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--runs", type=int, default=argparse.SUPPRESS,
                   help="number of seeded runs (default: 100)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="master seed (default: 42)")
    p.add_argument("--train-fraction", type=float, default=argparse.SUPPRESS,
                   help="train share of each split (default: 0.70)")
    p.add_argument("--no-stratify", action="store_true", default=argparse.SUPPRESS,
                   help="disable stratified splitting (default: stratified)")
    p.add_argument("--metrics-mode", choices=("positive", "macro"),
                   default=argparse.SUPPRESS,
                   help="precision/recall averaging (default: positive)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="parallel run workers (default: 1)")


def _load_config_file(path: str) -> dict:
    raw = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            raise StrokelabError(
                "TOML config files need Python >= 3.11; use JSON instead"
            ) from None
        return tomllib.loads(raw.decode())
    return json.loads(raw)


def _merge_options(args: argparse.Namespace) -> dict:
    """Layer options: hard defaults < config file < explicit flags."""
    provided = {k: v for k, v in vars(args).items() if k != "command"}
    merged = dict(_DEFAULTS)
    config_path = provided.get("config") or _DEFAULTS["config"]
    if config_path:
        file_options = _load_config_file(config_path)
        unknown = set(file_options) - set(_DEFAULTS) - {"input"}
        if unknown:
            raise StrokelabError(f"unknown config file keys: {sorted(unknown)}")
        merged.update(file_options)
    merged.update(provided)
    if merged.get("output_dir") is None:
        merged["output_dir"] = os.environ.get(ENV_OUTPUT_DIR, "strokelab-out")
    return merged


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        options = _merge_options(args)
        outdir = Path(options["output_dir"])
        outdir.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        digest = _COMMANDS[args.command](options, outdir)
        _write_json(
            outdir / "manifest.json",
            {
                "version": __version__,
                "command": args.command,
                "config_digest": digest,
                "master_seed": options.get("seed"),
                "wall_time_s": round(time.perf_counter() - started, 3),
            },
        )
        return 0
    except (StrokelabError, OSError, ValueError) as exc:
        print(f"strokelab: error: {exc}", file=sys.stderr)
        return 2


# --- commands ----------------------------------------------------------------


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_lines(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n")


def _options_digest(options: dict, keys: tuple[str, ...], extra: str = "") -> str:
    view = {k: options.get(k) for k in keys}
    payload = json.dumps(view, sort_keys=True) + extra
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _cmd_inspect(options: dict, outdir: Path) -> str:
    matrix, emap, parsed = load_dataset(options["input"])
    _write_json(
        outdir / "inspect.json",
        {
            "rows": matrix.n_rows,
            "positives": int(matrix.y.sum()),
            "positive_fraction": float(matrix.y.mean()),
            "missing_bmi": sum(1 for r in parsed.records if r.bmi is None),
            "rejected_rows": [
                {"row": issue.row, "reason": issue.reason} for issue in parsed.issues
            ],
            "data_digest": matrix.digest(),
        },
    )
    _write_json(outdir / "encoding.json", emap.to_json())
    return _options_digest(options, ("input",), matrix.digest())


def _cmd_correlate(options: dict, outdir: Path) -> str:
    matrix, _, _ = load_dataset(options["input"])
    corr = correlation_matrix(matrix)
    _write_lines(outdir / "correlation.csv", corr.csv_lines())
    return _options_digest(options, ("input",), matrix.digest())


def _cmd_importance(options: dict, outdir: Path) -> str:
    matrix, _, _ = load_dataset(options["input"])
    _write_json(outdir / "importance.json", auc_importance(matrix).to_json())
    return _options_digest(options, ("input",), matrix.digest())


def _cmd_chads2(options: dict, outdir: Path) -> str:
    _, _, parsed = load_dataset(options["input"])
    result = chads2_analysis(
        parsed.records,
        age_threshold=options["age_threshold"],
        glucose_threshold=options["glucose_threshold"],
    )
    _write_json(outdir / "chads2.json", result.to_json())
    return _options_digest(options, ("input", "age_threshold", "glucose_threshold"))


def _cmd_pca(options: dict, outdir: Path) -> str:
    matrix, _, _ = load_dataset(options["input"])
    if options["balanced"]:
        matrix = balanced_downsample(matrix, options["seed"])
    model = fit_pca(matrix)
    _write_lines(
        outdir / "scree.csv",
        ["component,ratio,cumulative"]
        + [f"{i},{r!r},{c!r}" for i, r, c in scree_data(model)],
    )
    _write_lines(
        outdir / "loadings.csv",
        ["feature,pc1_abs,pc1_strong,pc2_abs,pc2_strong"]
        + [
            f"{row.feature},{row.pc1!r},{int(row.pc1_strong)},{row.pc2!r},{int(row.pc2_strong)}"
            for row in loadings_report(model)
        ],
    )
    _write_lines(
        outdir / "biplot.csv",
        ["feature,x,y"] + [f"{f},{x!r},{y!r}" for f, x, y in biplot_coords(model)],
    )
    scores = transform(model, matrix, k=2)
    _write_lines(
        outdir / "scores.csv",
        ["score1,score2,cos2,stroke"]
        + [
            f"{scores.scores[i, 0]!r},{scores.scores[i, 1]!r},"
            f"{scores.cos2[i]!r},{int(scores.labels[i])}"
            for i in range(len(scores.labels))
        ],
    )
    return _options_digest(options, ("input", "balanced", "seed"), matrix.digest())


def _experiment_config(options: dict, matrix: EncodedMatrix) -> ExperimentConfig:
    features = FeatureSet.parse(
        options["features"], train_fold_pca=not options["pca_global"]
    )
    return ExperimentConfig(
        data=matrix,
        features=features,
        model=ModelSpec(family=options["model"], seed=options["seed"]),
        runs=options["runs"],
        master_seed=options["seed"],
        split=SplitSpec(
            train_fraction=options["train_fraction"],
            stratified=not options["no_stratify"],
            seed=options["seed"],
        ),
        metrics_mode=options["metrics_mode"],
    )


def _cmd_train(options: dict, outdir: Path) -> str:
    matrix, _, _ = load_dataset(options["input"])
    if options["balanced"]:
        matrix = balanced_downsample(matrix, options["seed"])
    features = FeatureSet.parse(options["features"], train_fold_pca=False)
    if features.kind == "pc":
        pca = fit_pca(matrix)
        names = tuple(f"PC{i + 1}" for i in range(features.k))
        matrix = matrix.replace_features(transform(pca, matrix, features.k).scores, names)
    elif features.kind in ("top4", "custom"):
        from .experiments import TOP_FOUR

        matrix = matrix.select(TOP_FOUR if features.kind == "top4" else features.features)
    model = train(matrix, ModelSpec(family=options["model"], seed=options["seed"]))
    _write_json(outdir / "model.json", model_to_json(model))
    return _options_digest(
        options, ("input", "model", "features", "seed", "balanced"), matrix.digest()
    )


def _cmd_benchmark(options: dict, outdir: Path) -> str:
    matrix, _, _ = load_dataset(options["input"])
    config = _experiment_config(options, matrix)
    result = run_benchmark(config, workers=options["threads"])
    _write_benchmark(outdir, result)
    return config.digest()


def _write_benchmark(outdir: Path, result: RunResult) -> None:
    _write_lines(outdir / "metrics.csv", result.csv_lines())
    _write_json(outdir / "aggregate.json", result.aggregate.to_json())
    bins = histogram_bins(result.aggregate.raw_values("accuracy"))
    _write_lines(
        outdir / "histogram.csv",
        ["bin_lo,bin_hi,count"] + [f"{lo!r},{hi!r},{c}" for lo, hi, c in bins],
    )


def _cmd_ablate(options: dict, outdir: Path) -> str:
    matrix, _, _ = load_dataset(options["input"])
    config = _experiment_config(options, matrix)
    runner = ablation_add if options["mode"] == "add" else ablation_remove
    result: AblationResult = runner(config, workers=options["threads"])
    _write_lines(outdir / "ablation.csv", result.csv_lines())
    _write_json(
        outdir / "ablation.json",
        {
            "mode": result.mode,
            "stages": [
                {
                    "label": stage.label,
                    "features": list(stage.features),
                    "mean_accuracy": stage.result.aggregate.means["accuracy"],
                    "mean_miss_rate": stage.result.aggregate.means["miss_rate"],
                }
                for stage in result.stages
            ],
        },
    )
    return config.digest()


def _cmd_synth(options: dict, outdir: Path) -> str:
    records = synthesize(options["n"], options["balance"], options["seed"])
    records_to_csv(records, outdir / "synthetic.csv")
    return _options_digest(options, ("n", "balance", "seed"))


_COMMANDS = {
    "inspect": _cmd_inspect,
    "correlate": _cmd_correlate,
    "importance": _cmd_importance,
    "chads2": _cmd_chads2,
    "pca": _cmd_pca,
    "train": _cmd_train,
    "benchmark": _cmd_benchmark,
    "ablate": _cmd_ablate,
    "synth": _cmd_synth,
}


if __name__ == "__main__":
    sys.exit(main())
