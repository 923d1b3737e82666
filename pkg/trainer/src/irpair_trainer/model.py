"""A small causal decoder plus LoRA adapters, trainable on CPU.

The base decoder's residual output projections (attention out-proj and MLP
down-proj) are zero-initialized, so a frozen base contributes nothing
across positions: at step 0 the model is position-local, which makes the
prompt-masking check exact. All cross-position computation is learned
through the LoRA deltas; the only other trainable parameters are layer
norms and the output-head bias.

There are no absolute position embeddings: toy training data tends to have
near-constant prompt lengths, and absolute positions overfit to them badly.
Ordering comes from a linear relative-distance attention bias per head,
which generalizes across prompt lengths the model never saw while still
supporting copy/induction behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 96
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    max_positions: int = 768
    adapter_rank: int = 16
    adapter_alpha: float = 32.0
    seed: int = 0

    def to_json(self) -> dict:
        return self.__dict__.copy()


class LoRALinear(nn.Module):
    """Frozen linear layer with a trainable low-rank delta."""

    def __init__(self, d_in: int, d_out: int, rank: int, alpha: float, zero_base: bool = False):
        super().__init__()
        self.base = nn.Linear(d_in, d_out, bias=False)
        if zero_base:
            nn.init.zeros_(self.base.weight)
        else:
            nn.init.normal_(self.base.weight, std=0.02)
        self.base.weight.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.empty(rank, d_in))
        self.lora_b = nn.Parameter(torch.zeros(d_out, rank))
        nn.init.normal_(self.lora_a, std=0.02)
        self.scaling = alpha / rank

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * F.linear(F.linear(x, self.lora_a), self.lora_b)


def relative_bias(n_heads: int, seq: int, device) -> torch.Tensor:
    """Per-head linear distance penalty (ALiBi-style), shape (heads, seq, seq)."""
    slopes = torch.tensor(
        [2.0 ** (-8.0 * (h + 1) / n_heads) for h in range(n_heads)], device=device
    )
    positions = torch.arange(seq, device=device)
    distance = (positions[:, None] - positions[None, :]).clamp(min=0).float()
    return -slopes[:, None, None] * distance


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d, r, a = cfg.d_model, cfg.adapter_rank, cfg.adapter_alpha
        self.n_heads = cfg.n_heads
        self.ln1 = nn.LayerNorm(d)
        self.q = LoRALinear(d, d, r, a)
        self.k = LoRALinear(d, d, r, a)
        self.v = LoRALinear(d, d, r, a)
        self.attn_out = LoRALinear(d, d, r, a, zero_base=True)
        self.ln2 = nn.LayerNorm(d)
        self.ff_in = LoRALinear(d, cfg.d_ff, r, a)
        self.ff_out = LoRALinear(cfg.d_ff, d, r, a, zero_base=True)

    def forward(self, x: torch.Tensor, attn_mask: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
        h = self.ln1(x)
        batch, seq, d = h.shape
        head_dim = d // self.n_heads

        def heads(t: torch.Tensor) -> torch.Tensor:
            return t.view(batch, seq, self.n_heads, head_dim).transpose(1, 2)

        q, k, v = heads(self.q(h)), heads(self.k(h)), heads(self.v(h))
        scores = q @ k.transpose(-2, -1) / math.sqrt(head_dim) + bias
        scores = scores.masked_fill(attn_mask, float("-inf"))
        attended = (F.softmax(scores, dim=-1) @ v).transpose(1, 2).reshape(batch, seq, d)
        x = x + self.attn_out(attended)
        x = x + self.ff_out(F.gelu(self.ff_in(self.ln2(x))))
        return x


class TinyDecoder(nn.Module):
    """Causal LM over the built tokenizer's vocabulary."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        torch.manual_seed(cfg.seed)
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        nn.init.normal_(self.tok_emb.weight, std=0.02)
        self.tok_emb.weight.requires_grad_(False)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = LoRALinear(cfg.d_model, cfg.vocab_size, cfg.adapter_rank, cfg.adapter_alpha)
        self.head_bias = nn.Parameter(torch.zeros(cfg.vocab_size))

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        batch, seq = ids.shape
        if seq > self.cfg.max_positions:
            raise ValueError(f"sequence length {seq} exceeds context {self.cfg.max_positions}")
        x = self.tok_emb(ids)
        causal = torch.triu(torch.ones(seq, seq, dtype=torch.bool, device=ids.device), diagonal=1)
        bias = relative_bias(self.cfg.n_heads, seq, ids.device)
        for block in self.blocks:
            x = block(x, causal, bias)
        return self.head(self.ln_f(x)) + self.head_bias

    @torch.no_grad()
    def generate(
        self,
        prompt_ids: list[int],
        max_new_tokens: int,
        eos_id: int,
        temperature: float = 0.0,
        seed: int | None = None,
    ) -> list[int]:
        self.eval()
        device = next(self.parameters()).device
        ids = torch.tensor([prompt_ids], dtype=torch.long, device=device)
        generator = None
        if temperature > 0:
            generator = torch.Generator(device="cpu")
            generator.manual_seed(seed if seed is not None else torch.seed() % 2**31)
        out: list[int] = []
        for _ in range(max_new_tokens):
            if ids.shape[1] >= self.cfg.max_positions:
                break
            logits = self(ids)[0, -1]
            if temperature > 0:
                probs = F.softmax(logits / temperature, dim=-1).cpu()
                next_id = int(torch.multinomial(probs, 1, generator=generator).item())
            else:
                next_id = int(torch.argmax(logits).item())
            if next_id == eos_id:
                break
            out.append(next_id)
            ids = torch.cat([ids, torch.tensor([[next_id]], device=device)], dim=1)
        return out


def count_parameters(model: nn.Module) -> tuple[int, int]:
    total = sum(p.numel() for p in model.parameters())
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    return total, trainable
