"""Adapter fine-tuning over an exported dataset directory.

Loss is computed on target tokens only (prompt tokens are masked), the
sequence is truncated from the left at the configured maximum length so
the target is always kept, and validation BLEU is logged every
``eval_every_steps`` optimizer steps plus once at the end of training.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch
from torch import nn

from .bleu import corpus_bleu
from .data import Dataset, load_dataset
from .lora import adapter_parameters, attach_adapters, save_adapter
from .model import build_model, init_seed, lr_lambda_linear, parameter_count
from .tokenizer import Tokenizer

EVAL_SAMPLE_CAP = 8
EVAL_MAX_NEW_TOKENS = 24


@dataclass
class TrainRun:
    data_dir: Path
    out_dir: Path
    model_id: str = "local-tiny"
    seed: int = 0
    eval_log: list[tuple[int, float, float]] = field(default_factory=list)


def encode_sample(record: dict, tokenizer: Tokenizer, max_len: int):
    """Token ids plus labels; labels are -100 outside the target span."""
    prompt_ids = [tokenizer.bos_id] + tokenizer.encode(record["prompt"])
    target_ids = tokenizer.encode(record["target"]) + [tokenizer.eos_id]
    ids = prompt_ids + target_ids
    labels = [-100] * len(prompt_ids) + list(target_ids)
    if len(ids) > max_len:  # keep the tail: cue and target survive truncation
        ids = ids[-max_len:]
        labels = labels[-max_len:]
    return ids, labels


def _batches(samples, batch_size, pad_id):
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        width = max(len(ids) for ids, _ in chunk)
        input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
        labels = torch.full((len(chunk), width), -100, dtype=torch.long)
        for row, (ids, labs) in enumerate(chunk):
            input_ids[row, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            labels[row, : len(labs)] = torch.tensor(labs, dtype=torch.long)
        yield input_ids, labels


def _loss(model, input_ids, labels, pad_id):
    logits = model(input_ids, pad_id=pad_id)
    # next-token prediction: logits at t score the token at t+1
    shifted_logits = logits[:, :-1, :]
    shifted_labels = labels[:, 1:]
    return nn.functional.cross_entropy(
        shifted_logits.reshape(-1, shifted_logits.size(-1)),
        shifted_labels.reshape(-1),
        ignore_index=-100,
    )


@torch.no_grad()
def greedy_generate(model, tokenizer, prompt: str, max_len: int, max_new_tokens: int) -> str:
    model.eval()
    ids = [tokenizer.bos_id] + tokenizer.encode(prompt)
    ids = ids[-(max_len - max_new_tokens) :]
    generated = []
    for _ in range(max_new_tokens):
        input_ids = torch.tensor([ids], dtype=torch.long)
        logits = model(input_ids, pad_id=tokenizer.pad_id)
        next_id = int(logits[0, -1].argmax())
        if next_id == tokenizer.eos_id:
            break
        generated.append(next_id)
        ids.append(next_id)
        if len(ids) >= max_len:
            break
    return tokenizer.decode(generated)


@torch.no_grad()
def _validation_bleu(model, tokenizer, records, max_len) -> float:
    sample = records[:EVAL_SAMPLE_CAP]
    hyps = [
        greedy_generate(model, tokenizer, r["prompt"], max_len, EVAL_MAX_NEW_TOKENS)
        for r in sample
    ]
    refs = [r["target"] for r in sample]
    return corpus_bleu(hyps, refs)


def train(run: TrainRun) -> Path:
    """Fine-tune adapters on the exported dataset; returns the adapter dir."""
    dataset: Dataset = load_dataset(run.data_dir)
    config = dataset.config
    init_seed(run.seed)

    texts = [r["prompt"] for r in dataset.train] + [r["target"] for r in dataset.train]
    tokenizer = Tokenizer.build(texts)
    model = build_model(run.model_id, tokenizer.vocab_size, config.max_sequence_length)
    wrapped = attach_adapters(model, config.adapter_rank, config.adapter_scaling)

    samples = [
        encode_sample(r, tokenizer, config.max_sequence_length) for r in dataset.train
    ]
    micro_batches_per_epoch = (len(samples) + config.batch_size - 1) // config.batch_size
    steps_per_epoch = max(
        1, (micro_batches_per_epoch + config.gradient_accumulation - 1) // config.gradient_accumulation
    )
    total_steps = steps_per_epoch * config.epochs
    warmup = max(1, round(config.warmup_ratio * total_steps))

    params = adapter_parameters(model)
    optimizer = torch.optim.AdamW(
        params, lr=config.learning_rate, weight_decay=config.weight_decay
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lr_lambda_linear(total_steps, warmup)
    )

    run.out_dir.mkdir(parents=True, exist_ok=True)
    log_path = run.out_dir / "eval_log.csv"
    started = time.monotonic()
    step = 0
    recent_loss = float("nan")

    def evaluate(at_step: int):
        bleu = _validation_bleu(
            model, tokenizer, dataset.eval_records(), config.max_sequence_length
        )
        run.eval_log.append((at_step, recent_loss, bleu))
        model.train()

    model.train()
    for _ in range(config.epochs):
        accumulated = 0
        optimizer.zero_grad()
        for input_ids, labels in _batches(samples, config.batch_size, tokenizer.pad_id):
            loss = _loss(model, input_ids, labels, tokenizer.pad_id)
            (loss / config.gradient_accumulation).backward()
            recent_loss = float(loss.detach())
            accumulated += 1
            if accumulated % config.gradient_accumulation == 0:
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
                step += 1
                if step % config.eval_every_steps == 0:
                    evaluate(step)
        if accumulated % config.gradient_accumulation != 0:  # epoch remainder
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
            step += 1
            if step % config.eval_every_steps == 0:
                evaluate(step)

    if not run.eval_log or run.eval_log[-1][0] != step:
        evaluate(step)  # always log at least one evaluation point

    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "bleu"])
        for row in run.eval_log:
            writer.writerow(row)

    adapter_dir = run.out_dir / "adapter"
    meta = {
        "model_id": run.model_id,
        "model_config": model.config.to_dict(),
        "adapter_rank": config.adapter_rank,
        "adapter_scaling": config.adapter_scaling,
        "wrapped_modules": wrapped,
        "seed": run.seed,
        "trainable_parameters": parameter_count(model, trainable_only=True),
        "train_records": len(dataset.train),
        "steps": step,
        "elapsed_seconds": time.monotonic() - started,
    }
    save_adapter(adapter_dir, model, meta)
    tokenizer.save(adapter_dir / "vocab.json")
    # echo the exported config verbatim so runs are auditable against it
    (adapter_dir / "training_config.json").write_text(
        json.dumps(config.raw, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return adapter_dir
