"""A small causal transformer LM used as the stand-in base model.

The paper-scale base model is a quantized 7B instruct model; this harness
accepts any model the registry can build, and ships "local-tiny" so the
whole training procedure runs on CPU in seconds. The identifier recorded in
the exported config is kept as documentation of the intended production
model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn


@dataclass
class ModelConfig:
    vocab_size: int
    max_positions: int = 1600
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 2
    d_ff: int = 128

    def to_dict(self) -> dict:
        return asdict(self)


class Block(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(config.d_model)
        self.attn = nn.MultiheadAttention(
            config.d_model, config.n_heads, batch_first=True
        )
        self.ln2 = nn.LayerNorm(config.d_model)
        self.ff_in = nn.Linear(config.d_model, config.d_ff)
        self.ff_out = nn.Linear(config.d_ff, config.d_model)

    def forward(self, x, attn_mask, key_padding_mask):
        normed = self.ln1(x)
        attended, _ = self.attn(
            normed,
            normed,
            normed,
            attn_mask=attn_mask,
            key_padding_mask=key_padding_mask,
            need_weights=False,
        )
        x = x + attended
        x = x + self.ff_out(torch.relu(self.ff_in(self.ln2(x))))
        return x


class TinyCausalLM(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_emb = nn.Embedding(config.max_positions, config.d_model)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(config.d_model)
        self.head = nn.Linear(config.d_model, config.vocab_size, bias=False)
        self.head.weight = self.tok_emb.weight  # tied

    def forward(self, input_ids: torch.Tensor, pad_id: int) -> torch.Tensor:
        batch, seq = input_ids.shape
        positions = torch.arange(seq, device=input_ids.device)
        x = self.tok_emb(input_ids) + self.pos_emb(positions)[None, :, :]
        causal = torch.triu(
            torch.full((seq, seq), float("-inf"), device=input_ids.device), diagonal=1
        )
        padding = input_ids.eq(pad_id)
        for block in self.blocks:
            x = block(x, causal, padding)
        return self.head(self.ln_f(x))


def build_model(identifier: str, vocab_size: int, max_positions: int) -> TinyCausalLM:
    """Model registry. "local-tiny" (and "tiny*") build the CPU stand-in;
    anything else is reported as unavailable in this environment."""
    if identifier == "local-tiny" or identifier.startswith("tiny"):
        config = ModelConfig(vocab_size=vocab_size, max_positions=max_positions)
        return TinyCausalLM(config)
    raise ValueError(
        f"model {identifier!r} is not available in this harness; "
        "use 'local-tiny' or provide a compatible registry entry"
    )


def parameter_count(module: nn.Module, trainable_only: bool = False) -> int:
    return sum(
        p.numel()
        for p in module.parameters()
        if p.requires_grad or not trainable_only
    )


def lr_lambda_linear(total_steps: int, warmup_steps: int):
    """Linear warmup then linear decay to zero, as a LambdaLR factor."""
    warmup_steps = max(1, warmup_steps)

    def factor(step: int) -> float:
        if step < warmup_steps:
            return (step + 1) / warmup_steps
        remaining = max(1, total_steps - warmup_steps)
        return max(0.0, (total_steps - step) / remaining)

    return factor


def init_seed(seed: int) -> None:
    torch.manual_seed(seed)
