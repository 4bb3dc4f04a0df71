"""Command-line surface: run one experiment, sweep a grid, or probe constants.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .aggregation import estimate_assumption_constants, theoretical_alpha
from .config import (
    AttackSpec,
    ConfigError,
    ExperimentConfig,
    config_to_dict,
    parse_config,
    validate_config,
)
from .models import gradient, with_theta
from .reporting import (
    final_accuracy,
    format_float,
    mean_wait_time,
    write_json_atomic,
    write_metrics_csv,
    write_text_atomic,
)
from .simulation import (
    _sample_batch,
    build_experiment,
    run_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


@dataclass(frozen=True)
class RunManifest:
    """Provenance record written next to every metrics.csv."""

    config_path: str
    output_dir: str
    overrides: tuple[str, ...]
    started_at: str
    artifact_version: str

    def to_json(self, config: ExperimentConfig) -> dict:
        doc = dataclasses.asdict(self)
        doc["overrides"] = list(self.overrides)
        doc["config"] = config_to_dict(config)
        return doc


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _write_outputs(records, config, manifest: RunManifest, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_metrics_csv(records, os.path.join(out_dir, "metrics.csv"))
    write_json_atomic(os.path.join(out_dir, "manifest.json"), manifest.to_json(config))


def _summary_line(records) -> str:
    acc = final_accuracy(records)
    acc_text = "n/a" if acc is None else format_float(acc)
    return (
        f"final loss {format_float(records[-1].loss)}"
        f", final accuracy {acc_text}"
        f", mean wait {format_float(mean_wait_time(records))} s"
        f" over {len(records)} iterations"
    )


def cmd_run(args) -> int:
    try:
        config = parse_config(args.config, args.set or [])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = RunManifest(
        config_path=str(args.config), output_dir=str(args.out),
        overrides=tuple(args.set or []), started_at=_now(),
        artifact_version=__version__,
    )
    try:
        records = run_experiment(config)
        _write_outputs(records, config, manifest, args.out)
    except Exception as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(_summary_line(records))
    return EXIT_OK


def _cell_config(base: ExperimentConfig, gar: str, attack: str) -> ExperimentConfig:
    scale = base.attack.scale
    config = dataclasses.replace(base, gar=gar, attack=AttackSpec(kind=attack, scale=scale))
    validate_config(config)
    return config


def cmd_sweep(args) -> int:
    try:
        base = parse_config(args.config, args.set or [])
        gars = [g.strip() for g in args.gars.split(",") if g.strip()]
        attacks = [a.strip() for a in args.attacks.split(",") if a.strip()]
        if not gars or not attacks:
            raise ConfigError("sweep needs at least one gar and one attack")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        os.makedirs(args.out, exist_ok=True)
        summary = ["gar,attack,final_accuracy,mean_wait_time,status"]
        for gar in gars:
            for attack in attacks:
                cell = f"{gar}__{attack}"
                cell_dir = os.path.join(args.out, cell)
                try:
                    config = _cell_config(base, gar, attack)
                    records = run_experiment(config)
                    manifest = RunManifest(
                        config_path=str(args.config), output_dir=cell_dir,
                        overrides=tuple(args.set or []), started_at=_now(),
                        artifact_version=__version__,
                    )
                    _write_outputs(records, config, manifest, cell_dir)
                    acc = final_accuracy(records)
                    summary.append(",".join([
                        gar, attack,
                        "" if acc is None else format_float(acc),
                        format_float(mean_wait_time(records)),
                        "ok",
                    ]))
                    print(f"{cell}: {_summary_line(records)}")
                except Exception as exc:
                    summary.append(",".join([gar, attack, "", "", "error"]))
                    print(f"{cell}: failed: {exc}", file=sys.stderr)
        write_text_atomic(os.path.join(args.out, "summary.csv"),
                          "\n".join(summary) + "\n")
    except Exception as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_probe(args) -> int:
    """Estimate the assumption constants on the configured task and report
    the resilience angle they imply."""
    try:
        config = parse_config(args.config, args.set or [])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        theta, state = build_experiment(config)
        model = with_theta(state.model, theta)

        worker_grads = []
        for w in state.workers:
            rows = _sample_batch(w.shard, state.batch_streams[w.id], config.n_b)
            worker_grads.append(gradient(model, *state.dataset.rows(rows)))
        validation_grads = []
        for _ in range(8):
            rows = _sample_batch(state.val_shard, state.val_stream, config.n_b)
            validation_grads.append(gradient(model, *state.dataset.rows(rows)))

        # secant probes for the Lipschitz constant: a short full-batch descent path
        x_train, y_train = state.dataset.rows(state.train_rows)
        pairs = []
        th = theta
        for _ in range(4):
            g_full = gradient(with_theta(state.model, th), x_train, y_train)
            pairs.append((th, g_full))
            th = th - config.eta * g_full
        grad_norm = float(np.linalg.norm(pairs[0][1]))

        est = estimate_assumption_constants(worker_grads, validation_grads, pairs)
    except Exception as exc:
        print(f"probe failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(f"d_sigma2   {format_float(est.d_sigma2)}")
    print(f"V_hat      {format_float(est.V_hat)}")
    print(f"Vprime_hat {format_float(est.Vprime_hat)}")
    print(f"L_hat      {format_float(est.L_hat)}")
    print(f"grad_norm  {format_float(grad_norm)}")
    try:
        alpha = theoretical_alpha(config.N, config.f, config.k, est.d_sigma2,
                                  est.V_hat, est.Vprime_hat, grad_norm)
        print(f"alpha      {format_float(alpha)} rad"
              f" ({format_float(alpha * 180.0 / np.pi)} deg)")
    except ValueError as exc:
        print(f"alpha      not defined: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dstar",
        description="Deterministic simulator for Byzantine-resilient distributed SGD",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable; dotted keys reach tables)")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a gar x attack grid")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--set", action="append", metavar="KEY=VALUE")
    sweep_p.add_argument("--gars", required=True, help="comma-separated rules")
    sweep_p.add_argument("--attacks", required=True, help="comma-separated attacks")
    sweep_p.add_argument("--out", required=True)
    sweep_p.set_defaults(func=cmd_sweep)

    probe_p = sub.add_parser("probe", help="report assumption constants and the resilience angle")
    probe_p.add_argument("--config", required=True)
    probe_p.add_argument("--set", action="append", metavar="KEY=VALUE")
    probe_p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
