"""Low-rank adapters over int8-quantized frozen base weights.

Each wrapped linear layer stores its base weight as per-row int8 with a
float scale (dequantized on the fly) and trains only the rank-r factors:

    y = x @ dequant(W8)^T + b + (alpha / r) * (x @ A^T) @ B^T

A is initialized from a small normal and B from zeros, so training starts
from the quantized base model's behavior.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from torch import nn

TARGET_SUFFIXES = ("attn.out_proj", "ff_in", "ff_out")


def quantize_rows(weight: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-row absmax int8 quantization; returns (int8 weight, row scales)."""
    scales = weight.abs().amax(dim=1).clamp(min=1e-8) / 127.0
    q = torch.round(weight / scales[:, None]).clamp(-127, 127).to(torch.int8)
    return q, scales


class QuantizedLoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: int):
        super().__init__()
        q, scales = quantize_rows(base.weight.detach())
        self.register_buffer("weight_q", q)
        self.register_buffer("weight_scale", scales)
        if base.bias is not None:
            self.register_buffer("bias", base.bias.detach().clone())
        else:
            self.bias = None
        self.rank = rank
        self.scaling = alpha / rank
        out_features, in_features = base.weight.shape
        self.lora_a = nn.Parameter(torch.randn(rank, in_features) * 0.02)
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))

    def dequantized_weight(self) -> torch.Tensor:
        return self.weight_q.float() * self.weight_scale[:, None]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = torch.nn.functional.linear(x, self.dequantized_weight(), self.bias)
        update = (x @ self.lora_a.T) @ self.lora_b.T
        return y + self.scaling * update


def attach_adapters(model: nn.Module, rank: int, alpha: int) -> list[str]:
    """Replace the target linear layers in each block; freezes everything
    else and returns the wrapped module paths."""
    for p in model.parameters():
        p.requires_grad_(False)

    wrapped = []
    for name, module in list(model.named_modules()):
        if not any(name.endswith(suffix) for suffix in TARGET_SUFFIXES):
            continue
        if not isinstance(module, nn.Linear):
            continue
        parent_name, _, attr = name.rpartition(".")
        parent = model.get_submodule(parent_name) if parent_name else model
        setattr(parent, attr, QuantizedLoRALinear(module, rank, alpha))
        wrapped.append(name)
    if not wrapped:
        raise ValueError("no adapter target layers found in model")
    return wrapped


def adapter_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def adapter_state(model: nn.Module) -> dict:
    state = {}
    for name, module in model.named_modules():
        if isinstance(module, QuantizedLoRALinear):
            state[f"{name}.lora_a"] = module.lora_a.detach().clone()
            state[f"{name}.lora_b"] = module.lora_b.detach().clone()
    return state


def load_adapter_state(model: nn.Module, state: dict) -> None:
    for name, module in model.named_modules():
        if isinstance(module, QuantizedLoRALinear):
            module.lora_a.data.copy_(state[f"{name}.lora_a"])
            module.lora_b.data.copy_(state[f"{name}.lora_b"])


def save_adapter(directory: str | Path, model: nn.Module, meta: dict) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    torch.save(adapter_state(model), directory / "adapter_weights.pt")
    (directory / "adapter_config.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return directory


def load_adapter_meta(directory: str | Path) -> dict:
    return json.loads((Path(directory) / "adapter_config.json").read_text(encoding="utf-8"))
