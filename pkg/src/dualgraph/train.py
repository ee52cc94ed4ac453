"""Training loop with dev-BLEU early stopping, config files and ablations."""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .data import batch_indices, make_batch
from .decoder import DecoderConfig
from .encoder import ABLATIONS, EncoderConfig
from .evaluation import bleu
from .model import Graph2Seq, count_parameters
from .optim import AdamState, adam_step, clip_grad_norm
from .vocab import DEFAULT_MAX_SIZE, build_vocab, load_pretrained_embeddings

log = logging.getLogger(__name__)

SEED_ENV = "DUALGRAPH_SEED"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    ablation: str = "dual"
    epochs: int = 30
    batch_size: int = 20
    lr: float = 0.001
    patience: int = 5
    seed: int = 0
    clip_norm: float = 2.0
    max_vocab: int = DEFAULT_MAX_SIZE
    stop_at_loss: float = 0.0
    dev_max_len: int = 0
    embeddings_path: str = ""
    train_path: str = ""
    dev_path: str = ""
    output_dir: str = ""

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")
        for name in ("epochs", "batch_size", "lr", "max_vocab"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")

    @classmethod
    def from_mapping(cls, values):
        """Build from flat keys; decoder fields take a ``decoder_`` prefix."""
        enc_fields = {f.name: f for f in dataclasses.fields(EncoderConfig)}
        dec_fields = {f"decoder_{f.name}": f for f in dataclasses.fields(DecoderConfig)}
        own = {f.name: f for f in dataclasses.fields(cls) if f.name not in ("encoder", "decoder")}
        enc, dec, top = {}, {}, {}
        for key, raw in values.items():
            if key in enc_fields:
                enc[key] = _convert(raw, enc_fields[key].type)
            elif key in dec_fields:
                dec[key[len("decoder_"):]] = _convert(raw, dec_fields[key].type)
            elif key in own:
                top[key] = _convert(raw, own[key].type)
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(encoder=EncoderConfig(**enc), decoder=DecoderConfig(**dec), **top)

    @classmethod
    def from_file(cls, path):
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                values[key] = value
        cfg = cls.from_mapping(values)
        base = Path(path).parent
        for name in ("train_path", "dev_path", "embeddings_path", "output_dir"):
            value = getattr(cfg, name)
            if value and not os.path.isabs(value):
                setattr(cfg, name, str(base / value))
        return cfg

    def to_lines(self):
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "encoder":
                lines += [f"{k} = {v}" for k, v in dataclasses.asdict(self.encoder).items()]
            elif f.name == "decoder":
                lines += [f"decoder_{k} = {v}" for k, v in dataclasses.asdict(self.decoder).items()]
            else:
                lines.append(f"{f.name} = {getattr(self, f.name)}")
        return lines


def _convert(raw, type_name):
    if not isinstance(raw, str):
        return raw
    t = str(type_name)
    if raw.lower() in ("none", "") and "None" in t:
        return None
    if t.startswith("bool"):
        return raw.lower() in ("1", "true", "yes", "on")
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def effective_seed(config):
    env = os.environ.get(SEED_ENV)
    return int(env) if env not in (None, "") else config.seed


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_bleu: float
    seconds: float
    best_so_far: float


@dataclass
class TrainResult:
    model: Graph2Seq
    history: list
    best_bleu: float
    best_epoch: int
    checkpoint: Path | None = None

    def metrics_tsv(self):
        lines = ["epoch\ttrain_loss\tdev_bleu\tseconds\tbest_so_far"]
        lines += [f"{r.epoch}\t{r.train_loss:.6f}\t{r.dev_bleu:.4f}\t{r.seconds:.3f}\t{r.best_so_far:.4f}"
                  for r in self.history]
        return "\n".join(lines) + "\n"


def build_model(config, train_corpus, seed=None):
    seed = effective_seed(config) if seed is None else seed
    src_vocab, tgt_vocab = build_vocab(train_corpus, config.max_vocab)
    model = Graph2Seq(config.encoder, config.decoder, src_vocab, tgt_vocab,
                      ablation=config.ablation, seed=seed)
    if config.embeddings_path:
        table, coverage = load_pretrained_embeddings(
            config.embeddings_path, src_vocab, config.encoder.embedding_dim, seed)
        model.set_embeddings(table)
        log.info("pretrained embeddings cover %.1f%% of the source vocabulary", 100 * coverage)
    return model


def train_epoch(model, items, config, rng, opt_state, epoch):
    """One pass over ``items``; returns the per-token training loss."""
    sizes = [p.num_nodes for p in items]
    _, batches = batch_indices(sizes, config.batch_size, rng)
    total_nll = 0.0
    total_tokens = 0
    for k, idx in enumerate(batches):
        batch = make_batch([items[i] for i in idx], idx)
        model.zero_grad()
        loss = model.loss(batch, train=True, rng=rng)
        value = float(loss.data)
        if not math.isfinite(value):
            raise TrainingDiverged(
                f"loss is {value} at epoch {epoch}, batch {k} (optimizer step {opt_state.step + 1})")
        T.backward(loss)
        grads = {name: p.grad for name, p in model.params.items() if p.grad is not None}
        clip_grad_norm(grads, config.clip_norm)
        adam_step(model.params, grads, opt_state, config.lr)
        total_nll += value * batch.size
        total_tokens += batch.num_tokens
    return total_nll / max(total_tokens, 1)


def evaluate_bleu(model, items, max_len=None):
    outputs = []
    for k in range(0, len(items), 32):
        chunk = items[k:k + 32]
        for item, ids in zip(chunk, model.greedy_ids(make_batch(chunk), max_len)):
            outputs.append(model.to_tokens(ids, item))
    return bleu([p.tokens for p in items], outputs), outputs


def train(config, train_corpus, dev_corpus, out_dir=None, model=None):
    """Train with Adam, keeping the parameters with the best dev BLEU.

    Stops after ``patience`` consecutive epochs without a dev improvement, at
    ``epochs``, or once the epoch's per-token training loss drops below
    ``stop_at_loss`` (when that is positive). When ``out_dir`` is given the
    best checkpoint and a metrics TSV are written there.
    """
    if not train_corpus or not dev_corpus:
        raise ValueError("train and dev corpora must be nonempty")
    seed = effective_seed(config)
    model = model if model is not None else build_model(config, train_corpus, seed)
    rng = np.random.default_rng(seed)
    train_items = model.prepare(train_corpus)
    dev_items = model.prepare(dev_corpus)
    out_dir = Path(out_dir or config.output_dir) if (out_dir or config.output_dir) else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = out_dir / "model.ckpt" if out_dir is not None else None
    opt_state = AdamState()
    history, best, best_epoch, bad = [], -1.0, 0, 0
    best_params = None
    max_len = config.dev_max_len or None
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        loss = train_epoch(model, train_items, config, rng, opt_state, epoch)
        dev_bleu, _ = evaluate_bleu(model, dev_items, max_len)
        improved = dev_bleu > best
        if improved:
            best, best_epoch, bad = dev_bleu, epoch, 0
            best_params = {k: p.data.copy() for k, p in model.params.items()}
            if ckpt is not None:
                model.save(ckpt)
        else:
            bad += 1
        history.append(EpochRecord(epoch, loss, dev_bleu, time.perf_counter() - start, best))
        log.info("epoch %d loss %.4f dev BLEU %.2f (best %.2f)", epoch, loss, dev_bleu, best)
        if out_dir is not None:
            result = TrainResult(model, history, best, best_epoch, ckpt)
            (out_dir / "metrics.tsv").write_text(result.metrics_tsv(), encoding="utf-8")
        if bad > config.patience:
            break
        if config.stop_at_loss > 0 and loss < config.stop_at_loss:
            break
    if best_params is not None and config.stop_at_loss <= 0:
        for k, p in model.params.items():
            p.data = best_params[k]
    return TrainResult(model, history, best, best_epoch, ckpt)


@dataclass
class AblationRow:
    ablation: str
    parameters: int
    dev_bleu: float


def run_ablation(config, train_corpus, dev_corpus, out_dir=None, epochs=None):
    """Train the four encoder configurations in their canonical order.

    ``epochs=0`` skips training and only counts parameters.
    """
    rows = []
    for mode in ABLATIONS:
        cfg = dataclasses.replace(config, ablation=mode)
        if epochs:
            cfg = dataclasses.replace(cfg, epochs=epochs)
        sub = Path(out_dir) / mode if out_dir else None
        if epochs != 0:
            result = train(cfg, train_corpus, dev_corpus, sub)
            model, score = result.model, result.best_bleu
        else:
            model, score = build_model(cfg, train_corpus), float("nan")
        rows.append(AblationRow(mode, count_parameters(model.params), score))
    return rows


def ablation_table_tsv(rows):
    lines = ["model\tparameters\tdev_bleu"]
    lines += [f"{r.ablation}\t{r.parameters}\t{r.dev_bleu:.2f}" for r in rows]
    return "\n".join(lines) + "\n"


__all__ = ["TrainConfig", "TrainResult", "TrainingDiverged", "train", "run_ablation",
           "count_parameters", "build_model", "evaluate_bleu"]
