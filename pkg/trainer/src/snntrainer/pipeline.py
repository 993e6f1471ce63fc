"""End-to-end temporal pruning flow: train at the initial timestep count,
reduce to the target, profile firing rates, fine-tune, export."""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

from .data import load_dataset
from .quantize import quantize_export
from .train import TrainConfig, evaluate_at_timesteps, finetune, sfr_profile, train


@dataclass
class PruningReport:
    loss: str
    baseline_accuracy: float     # at the training timestep count
    reduced_accuracy: float      # same weights, reduced timesteps
    finetuned_accuracy: float    # after retraining at the reduced count
    sfr_baseline: list = field(default_factory=list)
    sfr_reduced: list = field(default_factory=list)


def run_pruning(cfg: TrainConfig, data, finetune_epochs: int | None = None,
                verbose: bool = False):
    """Algorithm: train -> drop to the reduced timestep count -> profile
    spike firing rates -> fine-tune from the pretrained weights."""
    base = train(cfg, data, verbose=verbose)
    x_test, y_test = data[2], data[3]
    reduced_acc = evaluate_at_timesteps(base.model, cfg.reduced_timesteps,
                                        x_test, y_test)
    sfr_base = sfr_profile(base.model, x_test, cfg.timesteps)
    sfr_red = sfr_profile(base.model, x_test, cfg.reduced_timesteps)
    tuned = finetune(base, cfg, data, epochs=finetune_epochs, verbose=verbose)
    report = PruningReport(cfg.loss, base.best_accuracy, reduced_acc,
                           tuned.best_accuracy, sfr_base, sfr_red)
    return report, base, tuned


def write_logs(out_dir: str, reports: dict) -> None:
    """CSV accuracy/SFR logs, one row per loss function."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "accuracy.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loss", "baseline_acc", "reduced_acc", "finetuned_acc"])
        for name, rep in reports.items():
            writer.writerow([name, repr(rep.baseline_accuracy),
                             repr(rep.reduced_accuracy),
                             repr(rep.finetuned_accuracy)])
    with open(os.path.join(out_dir, "sfr.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loss", "timesteps", "layer", "sfr"])
        for name, rep in reports.items():
            for l, v in enumerate(rep.sfr_baseline):
                writer.writerow([name, "baseline", l, repr(v)])
            for l, v in enumerate(rep.sfr_reduced):
                writer.writerow([name, "reduced", l, repr(v)])


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        prog="snntrainer",
        description="Temporal pruning with SDT/TET losses and quantized export")
    parser.add_argument("--arch", default="16c3-32c3-p2-32c3-p2-fc10")
    parser.add_argument("--loss", choices=["sdt", "tet"], default="tet")
    parser.add_argument("--timesteps", type=int, default=6)
    parser.add_argument("--reduced", type=int, default=1)
    parser.add_argument("--epochs", type=int, default=8)
    parser.add_argument("--train-samples", type=int, default=1500)
    parser.add_argument("--test-samples", type=int, default=600)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--mnist-dir", default=None)
    parser.add_argument("--out-dir", default="pruning_out")
    args = parser.parse_args(argv)

    cfg = TrainConfig(arch=args.arch, timesteps=args.timesteps,
                      reduced_timesteps=args.reduced, epochs=args.epochs,
                      loss=args.loss, seed=args.seed)
    data = load_dataset(args.train_samples, args.test_samples, args.seed,
                        args.mnist_dir)
    report, _, tuned = run_pruning(cfg, data, verbose=True)
    write_logs(args.out_dir, {args.loss: report})
    quantize_export(tuned.model,
                    os.path.join(args.out_dir, f"{args.loss}_t{args.reduced}.stiw"))
    print(f"baseline {report.baseline_accuracy:.4f} "
          f"reduced {report.reduced_accuracy:.4f} "
          f"finetuned {report.finetuned_accuracy:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
