"""Command-line entry point: train, eval, ensemble, predict, gradcheck,
sweep, and export, driven by a flat key=value config file plus flag
overrides (flags win).

All outputs of train and sweep land under a fresh timestamped directory
below the configured output root, together with a copy of the effective
configuration.  Exit codes: 0 success, 1 usage/config error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, gradcheck
from .data import (
    CharVocabulary,
    Vocabulary,
    load_dataset,
    load_embeddings,
    mix_snli,
    normalize_token,
    random_embeddings,
)
from .encoder import EncoderConfig, POOLING_METHODS
from .errors import (
    ConfigError,
    DataError,
    IntegrityError,
    InvalidInputError,
    NumericError,
    UsageError,
)
from .model import ModelConfig, NLIModel
from .training import TrainConfig, load_checkpoint, train

CONFIG_ENV_VAR = "NLIATTN_CONFIG"

_PATH_KEYS = (
    "train_file",
    "dev_file",
    "dev_mismatched_file",
    "snli_file",
    "embeddings_file",
    "out_dir",
)
_VALUE_KEYS = (
    "snli_fraction",
    "use_chars",
    "word_dim",
    "char_dim",
    "char_hidden",
    "hidden_per_dir",
    "pooling",
    "mlp_widths",
    "dropout",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "seed",
    "max_premise_len",
    "embedding_scale",
)
KNOWN_KEYS = set(_PATH_KEYS) | set(_VALUE_KEYS)


@dataclass
class RunConfig:
    """Merged view of the config file and command-line overrides."""

    train_file: str | None = None
    dev_file: str | None = None
    dev_mismatched_file: str | None = None
    snli_file: str | None = None
    embeddings_file: str | None = None
    out_dir: str = "runs"
    snli_fraction: float = 0.15
    use_chars: bool = False
    word_dim: int = 300
    char_dim: int = 20
    char_hidden: int = 50
    hidden_per_dir: int | None = None
    pooling: str = "mean"
    mlp_widths: tuple[int, ...] = (2000, 2000, 2000)
    dropout: float = 0.25
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 10
    seed: int = 0
    max_premise_len: int = 200
    embedding_scale: float = 0.05

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            encoder=EncoderConfig(
                use_chars=self.use_chars,
                word_dim=self.word_dim,
                char_dim=self.char_dim,
                char_hidden=self.char_hidden,
                hidden_per_dir=self.hidden_per_dir,
            ),
            pooling=self.pooling,
            mlp_widths=self.mlp_widths,
            dropout=self.dropout,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            seed=self.seed,
            max_premise_len=self.max_premise_len,
        )

    def effective_text(self) -> str:
        lines = []
        for key in sorted(KNOWN_KEYS):
            value = getattr(self, key)
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def build_run_config(args) -> RunConfig:
    config = RunConfig()
    config_path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        if not os.path.exists(config_path):
            raise ConfigError(f"config file not found: {config_path}")
        for key, raw in parse_config_file(config_path).items():
            _apply(config, key, raw)
    _apply_flags(config, args)
    return config


def _apply(config: RunConfig, key: str, raw: str) -> None:
    if key in _PATH_KEYS:
        setattr(config, key, raw)
    elif key == "use_chars":
        config.use_chars = _parse_bool(raw, key)
    elif key == "mlp_widths":
        try:
            config.mlp_widths = tuple(int(w) for w in raw.split(","))
        except ValueError as exc:
            raise ConfigError(f"config key mlp_widths: {raw!r}") from exc
    elif key in ("snli_fraction", "dropout", "learning_rate", "embedding_scale"):
        setattr(config, key, float(raw))
    elif key == "pooling":
        config.pooling = raw
    else:  # integer knobs
        try:
            setattr(config, key, int(raw))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}") from exc


def _apply_flags(config: RunConfig, args) -> None:
    mapping = {
        "pooling": "pooling",
        "seed": "seed",
        "batch_size": "batch_size",
        "epochs": "max_epochs",
        "lr": "learning_rate",
        "out_dir": "out_dir",
    }
    for flag, key in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, key, value)
    chars = getattr(args, "chars", None)
    if chars is not None:
        config.use_chars = chars


def make_run_dir(config: RunConfig) -> Path:
    stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    run_dir = Path(config.out_dir) / f"run-{stamp}"
    run_dir.mkdir(parents=True, exist_ok=False)
    (run_dir / "config.effective").write_text(config.effective_text(), encoding="utf-8")
    return run_dir


def _require_files(*paths) -> None:
    for path in paths:
        if path is not None and not os.path.exists(path):
            raise ConfigError(f"required file does not exist: {path}")


def _write_error_log(run_dir: Path | None, exc: Exception) -> None:
    if run_dir is None:
        return
    try:
        (run_dir / "error.json").write_text(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}, indent=2),
            encoding="utf-8",
        )
    except OSError:
        pass


# ---------------------------------------------------------------------------
# Commands


def cmd_train(args) -> int:
    config = build_run_config(args)
    if config.train_file is None or config.dev_file is None:
        raise ConfigError("train needs train_file and dev_file (config file or flags)")
    _require_files(config.train_file, config.dev_file, config.snli_file, config.embeddings_file)
    run_dir = make_run_dir(config)
    print(f"run directory: {run_dir}")
    print(f"effective seed: {config.seed}")
    try:
        train_load = load_dataset(config.train_file, "train")
        dev_load = load_dataset(config.dev_file, "dev")
        print(
            f"train: kept {train_load.kept} (dropped {train_load.dropped_no_label} unlabeled); "
            f"dev: kept {dev_load.kept}"
        )
        train_examples = train_load.examples
        if config.snli_file:
            snli_load = load_dataset(config.snli_file, "train")
            train_examples = mix_snli(
                train_examples,
                snli_load.examples,
                config.snli_fraction,
                np.random.default_rng([config.seed, 15]),
            )
            print(f"mixed in {len(train_examples) - train_load.kept} extra pairs")

        vocab = Vocabulary.from_examples(train_examples, dim=config.word_dim)
        char_vocab = CharVocabulary.from_examples(train_examples, dim=config.char_dim)
        vocab.save(run_dir / "vocab.txt")
        char_vocab.save(run_dir / "char_vocab.txt")

        emb_rng = np.random.default_rng([config.seed, 14])
        if config.embeddings_file:
            emb_load = load_embeddings(config.embeddings_file, vocab, emb_rng)
            embeddings = emb_load.parameter
            print(f"embeddings: {emb_load.found} from file, {emb_load.skipped_lines} lines skipped")
        else:
            embeddings = random_embeddings(vocab, emb_rng, scale=config.embedding_scale)
            print(f"embeddings: random, scale {config.embedding_scale}")

        model = NLIModel(
            config.model_config(),
            vocab,
            char_vocab,
            embeddings,
            np.random.default_rng([config.seed, 13]),
        )
        result = train(
            model,
            train_examples,
            dev_load.examples,
            config.train_config(),
            checkpoint_path=run_dir / "best.ckpt",
            log_path=run_dir / "train.log",
        )
        for record in result.epochs:
            print(record.format())
        if result.halted:
            raise NumericError(f"training halted: {result.halted}")
        print(
            f"best dev accuracy {result.best_dev_accuracy:.4f} at epoch {result.best_epoch}; "
            f"checkpoint {result.checkpoint_path}"
        )
        return 0
    except Exception as exc:
        _write_error_log(run_dir, exc)
        raise


def _load_eval_examples(path, split_role="dev"):
    _require_files(path)
    return load_dataset(path, split_role).examples


def cmd_eval(args) -> int:
    _require_files(args.checkpoint)
    examples = _load_eval_examples(args.data)
    loaded = load_checkpoint(args.checkpoint)
    report = evaluation.evaluate(loaded.model, examples, split=args.split)
    print(report.format())
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.checkpoint).parent
    out_path = out_dir / f"eval_{args.split}.json"
    out_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
    print(f"machine-readable report: {out_path}")
    return 0


def cmd_ensemble(args) -> int:
    for path in args.checkpoints:
        _require_files(path)
    examples = _load_eval_examples(args.data)
    models = [load_checkpoint(path).model for path in args.checkpoints]
    for path, model in zip(args.checkpoints, models):
        single = evaluation.evaluate(model, examples, split=args.split)
        print(f"{path}: {100 * single.overall_accuracy:.1f}")
    report = evaluation.ensemble_evaluate(models, examples, split=args.split)
    print(f"ensemble of {len(models)}:")
    print(report.format())
    return 0


def cmd_predict(args) -> int:
    _require_files(args.checkpoint)
    loaded = load_checkpoint(args.checkpoint)
    lines = sys.stdin.read().splitlines()
    if len(lines) < 2:
        raise UsageError("predict reads two lines from stdin: premise, then hypothesis")
    premise = [normalize_token(t) for t in lines[0].split() if t]
    hypothesis = [normalize_token(t) for t in lines[1].split() if t]
    if not premise or not hypothesis:
        raise DataError("both sentences must contain at least one token")
    dist = loaded.model.predict_tokens(premise, hypothesis)
    from .data import LABELS

    for label, p in zip(LABELS, dist.probs):
        print(f"{label} {p:.6f}")
    print(f"predicted: {LABELS[dist.predicted_class]}")
    return 0


def cmd_gradcheck(args) -> int:
    if args.dims != "tiny":
        raise ConfigError(f"unsupported --dims {args.dims!r}; only 'tiny' is available")
    print(f"effective seed: {args.seed if args.seed is not None else 7}")
    report = gradcheck.run_full_check(seed=args.seed if args.seed is not None else 7)
    print(report.format())
    if not report.passed:
        raise NumericError(
            "gradient check failed for: " + ", ".join(report.failures)
        )
    return 0


def cmd_sweep(args) -> int:
    config = build_run_config(args)
    if config.train_file is None or config.dev_file is None:
        raise ConfigError("sweep needs train_file and dev_file")
    _require_files(config.train_file, config.dev_file)
    run_dir = make_run_dir(config)
    print(f"run directory: {run_dir}")
    print(f"effective seed: {config.seed}")
    try:
        train_examples = load_dataset(config.train_file, "train").examples
        dev_examples = load_dataset(config.dev_file, "dev").examples
        seeds = [config.seed + i for i in range(args.runs_per_cell)]
        runs, summary = evaluation.pooling_sweep(
            train_examples,
            dev_examples,
            config.model_config(),
            config.train_config(),
            runs_per_cell=args.runs_per_cell,
            seeds=seeds,
            embedding_scale=config.embedding_scale,
            jobs=args.jobs,
        )
        evaluation.write_sweep_records(runs, run_dir / "sweep_runs.log")
        mean_table = summary.format_mean_table()
        best_table = summary.format_best_table()
        (run_dir / "sweep_mean.txt").write_text(mean_table + "\n", encoding="utf-8")
        (run_dir / "sweep_best.txt").write_text(best_table + "\n", encoding="utf-8")
        print(f"{len(runs)} runs over {len(summary.cells)} cells")
        print("mean +- 95% CI per cell:")
        print(mean_table)
        print("best per cell:")
        print(best_table)
        return 0
    except Exception as exc:
        _write_error_log(run_dir, exc)
        raise


def cmd_export(args) -> int:
    _require_files(args.checkpoint)
    examples = _load_eval_examples(args.data)
    loaded = load_checkpoint(args.checkpoint)
    count = evaluation.export_representations(loaded.model, examples, args.output)
    print(f"wrote {count} records to {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Parser and dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nliattn",
        description="Train and evaluate inner-attention NLI sentence encoders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_model_flags=True):
        p.add_argument("--config", help=f"key=value config file (or ${CONFIG_ENV_VAR})")
        p.add_argument("--out-dir", dest="out_dir", help="output root directory")
        p.add_argument("--seed", type=int, help="master random seed")
        if with_model_flags:
            p.add_argument("--pooling", choices=POOLING_METHODS)
            p.add_argument(
                "--chars",
                action=argparse.BooleanOptionalAction,
                default=None,
                help="use character features (--no-chars disables)",
            )
            p.add_argument("--batch-size", dest="batch_size", type=int)
            p.add_argument("--epochs", type=int)
            p.add_argument("--lr", type=float)

    p_train = sub.add_parser("train", help="train a model and keep the best checkpoint")
    add_common(p_train)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--split", choices=("matched", "mismatched"), default="matched")
    p_eval.add_argument("--out-dir", dest="out_dir")
    p_eval.set_defaults(fn=cmd_eval)

    p_ens = sub.add_parser("ensemble", help="evaluate an ensemble of checkpoints")
    p_ens.add_argument("--checkpoints", nargs="+", required=True)
    p_ens.add_argument("--data", required=True)
    p_ens.add_argument("--split", choices=("matched", "mismatched"), default="matched")
    p_ens.set_defaults(fn=cmd_ensemble)

    p_pred = sub.add_parser("predict", help="classify one premise/hypothesis pair from stdin")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.set_defaults(fn=cmd_predict)

    p_grad = sub.add_parser("gradcheck", help="finite-difference verification suite")
    p_grad.add_argument("--dims", default="tiny")
    p_grad.add_argument("--seed", type=int)
    p_grad.set_defaults(fn=cmd_gradcheck)

    p_sweep = sub.add_parser("sweep", help="pooling-method sweep over seeds")
    add_common(p_sweep)
    p_sweep.add_argument("--runs-per-cell", dest="runs_per_cell", type=int, default=2)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_exp = sub.add_parser("export", help="export refined sentence representations as TSV")
    p_exp.add_argument("--checkpoint", required=True)
    p_exp.add_argument("--data", required=True)
    p_exp.add_argument("--output", required=True)
    p_exp.set_defaults(fn=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.fn(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, IntegrityError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
