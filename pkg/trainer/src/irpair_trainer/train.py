"""Adapter fine-tuning with warmup, plateau scheduling, and early stopping.

Recipe: token-level cross-entropy on completion tokens only, mini-batches of
10, learning rate ramped linearly to 2.0e-4 over the first 50 batches, then
reduce-on-plateau (patience 5, factor 0.7) driven by validation loss, early
stop when no new minimum validation loss appears within 100 optimization
steps. Checkpoint selection is the exact argmin of recorded validation
losses, earlier step on ties. Validation runs every 25 steps, step 0
included so the plateau window and the selection baseline are well-defined.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch.nn import functional as F

from .data import batches, encode_rows, read_contract_file
from .model import ModelConfig, TinyDecoder, count_parameters
from .tokenizer import Vocab

ROLES = ("inversion", "downstream")


class TrainerError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    base_model: str = "tiny-decoder"
    adapter_rank: int = 16
    adapter_alpha: float = 32.0
    batch_size: int = 10
    peak_lr: float = 2.0e-4
    warmup_batches: int = 50
    plateau_patience: int = 5
    plateau_factor: float = 0.7
    early_stop_plateau: int = 100
    max_steps: int = 400
    eval_interval: int = 25
    seed: int = 0
    d_model: int = 96
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_positions: int = 768

    def __post_init__(self) -> None:
        if self.adapter_rank <= 0:
            raise TrainerError(f"adapter_rank must be > 0, got {self.adapter_rank}")
        if self.batch_size <= 0 or self.max_steps <= 0 or self.eval_interval <= 0:
            raise TrainerError("batch_size, max_steps, and eval_interval must be positive")

    def to_json(self) -> dict:
        return self.__dict__.copy()


@dataclass(frozen=True)
class Checkpoint:
    path: Path
    step: int
    train_loss: float
    val_loss: float
    role: str


@dataclass
class TrainResult:
    best: Checkpoint
    history: list[dict] = field(default_factory=list)  # one row per evaluation
    step0_val_loss: float = 0.0
    stopped_early: bool = False


def _build_model(config: TrainConfig, vocab_size: int) -> TinyDecoder:
    if config.base_model != "tiny-decoder":
        # pretrained bases are a documented config preset, not available in
        # this offline build
        raise TrainerError(
            f"base_model {config.base_model!r} is not available; this build ships "
            "only the built-in 'tiny-decoder' base"
        )
    model_cfg = ModelConfig(
        vocab_size=vocab_size,
        d_model=config.d_model,
        n_heads=config.n_heads,
        n_layers=config.n_layers,
        d_ff=config.d_ff,
        max_positions=config.max_positions,
        adapter_rank=config.adapter_rank,
        adapter_alpha=config.adapter_alpha,
        seed=config.seed,
    )
    return TinyDecoder(model_cfg)


def masked_loss(model: TinyDecoder, ids, labels, mask) -> torch.Tensor:
    logits = model(ids)
    flat = logits.reshape(-1, logits.shape[-1])[mask.reshape(-1)]
    targets = labels.reshape(-1)[mask.reshape(-1)]
    return F.cross_entropy(flat, targets)


@torch.no_grad()
def evaluate_loss(model: TinyDecoder, examples, vocab: Vocab, batch_size: int) -> float:
    model.eval()
    total, count = 0.0, 0
    for ids, labels, mask in batches(examples, vocab, batch_size, seed=0, shuffle=False):
        logits = model(ids)
        flat = logits.reshape(-1, logits.shape[-1])[mask.reshape(-1)]
        targets = labels.reshape(-1)[mask.reshape(-1)]
        total += F.cross_entropy(flat, targets, reduction="sum").item()
        count += int(mask.sum().item())
    return total / max(count, 1)


def save_checkpoint(
    out_dir: Path, model: TinyDecoder, vocab: Vocab, config: TrainConfig, role: str, step: int
) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"step{step:05d}.pt"
    torch.save(
        {
            "model_state": model.state_dict(),
            "model_config": model.cfg.to_json(),
            "train_config": config.to_json(),
            "vocab": vocab.tokens,
            "role": role,
            "step": step,
        },
        path,
    )
    return path


def load_checkpoint(path: str | Path) -> tuple[TinyDecoder, Vocab, dict]:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    vocab = Vocab(payload["vocab"])
    model = TinyDecoder(ModelConfig(**payload["model_config"]))
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, vocab, payload


def train(
    train_file: str | Path,
    val_file: str | Path,
    config: TrainConfig,
    role: str,
    out_dir: str | Path,
    log=print,
) -> TrainResult:
    """Fine-tune adapters on one trainer-contract dataset; return the best checkpoint."""
    if role not in ROLES:
        raise TrainerError(f"role must be one of {ROLES}, got {role!r}")
    out_dir = Path(out_dir)
    train_rows = read_contract_file(train_file)
    val_rows = read_contract_file(val_file)

    torch.manual_seed(config.seed)
    vocab = Vocab.build([r["prompt"] + "\n" + r["completion"] for r in train_rows + val_rows])
    train_examples = encode_rows(train_rows, vocab, config.max_positions)
    val_examples = encode_rows(val_rows, vocab, config.max_positions)
    model = _build_model(config, len(vocab))
    total, trainable = count_parameters(model)
    log(f"model: {total} parameters, {trainable} trainable ({trainable / total:.1%})")

    optimizer = torch.optim.AdamW(model.trainable_parameters(), lr=config.peak_lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, mode="min", factor=config.plateau_factor, patience=config.plateau_patience
    )

    history: list[dict] = []
    checkpoints: list[Checkpoint] = []
    best_val = math.inf
    best_step = 0
    last_train_loss = 0.0

    def run_eval(step: int) -> float:
        nonlocal best_val, best_step
        val_loss = evaluate_loss(model, val_examples, vocab, config.batch_size)
        path = save_checkpoint(out_dir, model, vocab, config, role, step)
        checkpoints.append(Checkpoint(path, step, last_train_loss, val_loss, role))
        history.append(
            {
                "step": step,
                "train_loss": round(last_train_loss, 6),
                "val_loss": round(val_loss, 6),
                "lr": optimizer.param_groups[0]["lr"],
            }
        )
        if val_loss < best_val:
            best_val, best_step = val_loss, step
        log(f"step {step}: train {last_train_loss:.4f} val {val_loss:.4f}")
        return val_loss

    step0_val = run_eval(0)
    step = 0
    stopped_early = False
    started = time.monotonic()
    epoch = 0
    while step < config.max_steps and not stopped_early:
        epoch += 1
        for ids, labels, mask in batches(
            train_examples, vocab, config.batch_size, seed=config.seed + epoch
        ):
            step += 1
            if step <= config.warmup_batches:
                for group in optimizer.param_groups:
                    group["lr"] = config.peak_lr * step / config.warmup_batches
            model.train()
            optimizer.zero_grad()
            loss = masked_loss(model, ids, labels, mask)
            if not torch.isfinite(loss):
                raise TrainerError(
                    f"non-finite training loss at step {step} "
                    f"(lr={optimizer.param_groups[0]['lr']:.2e}, batch={ids.shape})"
                )
            loss.backward()
            optimizer.step()
            last_train_loss = float(loss.item())
            if step % config.eval_interval == 0:
                val_loss = run_eval(step)
                if step > config.warmup_batches:
                    scheduler.step(val_loss)
                if step - best_step >= config.early_stop_plateau:
                    stopped_early = True
                    log(f"early stop: no new minimum within {config.early_stop_plateau} steps")
                    break
            if step >= config.max_steps:
                break

    if history[-1]["step"] != step:
        run_eval(step)
    # exact argmin over recorded validation losses; earlier step wins ties
    best = min(checkpoints, key=lambda c: (c.val_loss, c.step))
    result = TrainResult(
        best=best, history=history, step0_val_loss=step0_val, stopped_early=stopped_early
    )
    summary = {
        "role": role,
        "best_step": best.step,
        "best_val_loss": round(best.val_loss, 6),
        "step0_val_loss": step0_val,
        "stopped_early": stopped_early,
        "wall_time": round(time.monotonic() - started, 2),
        "history": history,
        "best_checkpoint": str(best.path),
    }
    (out_dir / "training.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    log(f"best checkpoint: step {best.step} (val {best.val_loss:.4f}) -> {best.path}")
    return result
