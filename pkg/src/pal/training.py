"""Two-stage training pipeline and every ablation variant.

Stage one trains the partner encoder with a contrastive objective; stage two
trains the main encoder (plus its cosine classifier) under cross-entropy
with optional feature-level and logit-level alignment against the frozen
partner. ``train_variant`` dispatches the full grid of alternatives:
single-objective baselines, multi-task, mutual learning, the reversed
integration order, and partners trained under other objectives.

One training run is a single logical writer over its model state; runs with
distinct configs are fully independent (each derives every generator it uses
from its own seed), so an ablation grid can execute them concurrently.

Logged loss components are per-instance means (component sums divided by the
2B batch rows), so learning rates keep the same meaning across batch sizes;
the loss *functions* themselves sum over instances as documented.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .batching import AugmentConfig, build_batch, sample_anchor_sets
from .core import Tensor, backward, scale, softmax_temperature
from .data import Split
from .encoders import (
    CosineClassifier,
    Encoder,
    EncoderConfig,
    save_classifier,
    save_encoder,
)
from .exceptions import ContractError, ParameterError
from .losses import (
    ContrastiveBatchView,
    ce_loss_batch,
    ct_loss,
    feat_align_loss,
    kl_loss_batch,
    logit_align_loss_batch,
    supct_loss,
)

logger = logging.getLogger(__name__)


class Variant(str, Enum):
    PAL = "PAL"
    CE_ONLY = "CE_only"
    SUPCT_ONLY = "SupCT_only"
    MULTITASK = "MultiTask"
    MUTUAL = "Mutual"
    REVERSE = "Reverse"
    PARTNER_CT = "Partner_CT"
    PARTNER_CE = "Partner_CE"
    PAL_LOGIT_ONLY = "PAL_logit_only"
    PAL_FEAT_ONLY = "PAL_feat_only"
    PAL_KL_LOGIT = "PAL_KL_logit"
    PAL_FEAT_KL = "PAL_feat_KL"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        for member in cls:
            if member.value == name:
                return member
        raise ParameterError(
            f"unknown variant {name!r}; expected one of {[m.value for m in cls]}"
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 90
    lr: float = 0.03
    lr_decay_factor: float = 10.0
    lr_decay_epoch: int = 60
    batch_size: int = 64
    tau: float = 0.5
    kl_tau: float | None = None  # temperature for the KL alignment rows
    logit_tau: float | None = None  # soft-label temperature for logit alignment
    warmup_epochs: int = 30
    seed: int = 0
    variant: Variant = Variant.PAL
    weight_decay: float = 5e-4
    momentum: float = 0.0
    n_pos: int | None = None  # anchor positives per instance; None = all
    n_neg: int | None = None

    def __post_init__(self):
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")
        if self.lr_decay_factor <= 0:
            raise ParameterError(f"lr_decay_factor must be positive, got {self.lr_decay_factor}")
        if not 0 <= self.lr_decay_epoch <= self.epochs:
            raise ParameterError(
                f"lr_decay_epoch must lie in [0, epochs], got {self.lr_decay_epoch}"
            )
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ParameterError(
                f"warmup_epochs must lie in [0, epochs], got {self.warmup_epochs}"
            )
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")

    @property
    def kl_temperature(self) -> float:
        return self.tau if self.kl_tau is None else self.kl_tau

    @property
    def logit_temperature(self) -> float:
        """Temperature applied to the partner's logits when forming the
        logit-alignment soft label; the contrastive tau by default."""
        return self.tau if self.logit_tau is None else self.logit_tau


class WarmupSchedule:
    """Linear ramp of the logit-alignment weight: 0 at epoch 0, 1 from
    ``warmup_epochs`` on, nondecreasing, capped at 1."""

    def __init__(self, warmup_epochs: int):
        if warmup_epochs < 0:
            raise ParameterError(f"warmup_epochs must be >= 0, got {warmup_epochs}")
        self.warmup_epochs = warmup_epochs

    def __call__(self, epoch: int) -> float:
        if self.warmup_epochs == 0:
            return 1.0
        return min(1.0, epoch / self.warmup_epochs)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step schedule: initial lr, divided by the decay factor from the decay
    epoch onward."""
    if not 0 <= epoch < cfg.epochs:
        raise ParameterError(f"epoch {epoch} outside [0, {cfg.epochs})")
    if epoch < cfg.lr_decay_epoch or cfg.lr_decay_epoch == cfg.epochs:
        return cfg.lr
    return cfg.lr / cfg.lr_decay_factor


def sgd_step(params: list[Tensor], lr: float, weight_decay: float = 0.0) -> None:
    """One vanilla step: ``p <- p - lr * (grad + weight_decay * p)``."""
    for p in params:
        if p.grad is None:
            raise ContractError("sgd_step: parameter has no gradient; run backward first")
        p.data = p.data - lr * (p.grad + weight_decay * p.data)


class SGD:
    """SGD with optional momentum; re-normalizes classifier rows after every
    step so cosine logits stay bounded."""

    def __init__(
        self,
        params: list[Tensor],
        momentum: float = 0.0,
        classifier: CosineClassifier | None = None,
    ):
        self.params = list(params)
        self.momentum = float(momentum)
        self.velocity = [np.zeros_like(p.data) for p in self.params]
        self.classifier = classifier

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self, lr: float, weight_decay: float = 0.0) -> None:
        if self.momentum == 0.0:
            sgd_step(self.params, lr, weight_decay)
        else:
            for i, p in enumerate(self.params):
                if p.grad is None:
                    raise ContractError("SGD.step: parameter has no gradient; run backward first")
                g = p.grad + weight_decay * p.data
                self.velocity[i] = self.momentum * self.velocity[i] + g
                p.data = p.data - lr * self.velocity[i]
        if self.classifier is not None:
            self.classifier.renormalize()


METRIC_COLUMNS = (
    "epoch",
    "step",
    "lr",
    "loss_total",
    "loss_ce",
    "loss_feat",
    "loss_logit",
    "w_logit",
    "skipped_positive_instances",
    "loss_aux",
)


class MetricsLogger:
    """Per-step training log with a fixed CSV schema."""

    def __init__(self):
        self.rows: list[dict] = []

    def log(self, **kwargs) -> None:
        row = {col: kwargs.get(col, 0.0) for col in METRIC_COLUMNS}
        self.rows.append(row)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRIC_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    [
                        row["epoch"],
                        row["step"],
                        *(f"{row[c]:.10g}" for c in METRIC_COLUMNS[2:8]),
                        row["skipped_positive_instances"],
                        f"{row['loss_aux']:.10g}",
                    ]
                )

    def epoch_means(self, column: str) -> list[float]:
        by_epoch: dict[int, list[float]] = {}
        for row in self.rows:
            by_epoch.setdefault(row["epoch"], []).append(row[column])
        return [float(np.mean(by_epoch[e])) for e in sorted(by_epoch)]


def _seed_streams(cfg: TrainConfig) -> dict[str, np.random.SeedSequence]:
    names = (
        "partner_init",
        "main_init",
        "classifier_init",
        "partner_data",
        "main_data",
        "anchors",
        "second_init",
        "eval",
    )
    return dict(zip(names, np.random.SeedSequence(cfg.seed).spawn(len(names))))


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def eval_seed(cfg: TrainConfig) -> int:
    """Evaluation stream tied to the run seed (shared across variants with
    the same seed, so comparisons are paired)."""
    return _seed_int(_seed_streams(cfg)["eval"])


def _stage1_seed(cfg: TrainConfig) -> int:
    """Seed for a variant's internal pre-training stage, distinct from the
    stage-two streams."""
    return _seed_int(_seed_streams(cfg)["partner_init"])


def default_encoder_config(
    input_dim: int,
    seed: int,
    hidden_dims: tuple[int, ...] = (64, 64),
    embed_dim: int = 32,
) -> EncoderConfig:
    return EncoderConfig(
        input_dim=input_dim, hidden_dims=hidden_dims, embed_dim=embed_dim, seed=seed
    )


def _iter_batches(
    split: Split, cfg: TrainConfig, rng: np.random.Generator, aug: AugmentConfig
):
    order = rng.permutation(len(split.y))
    for start in range(0, len(order), cfg.batch_size):
        chunk = order[start : start + cfg.batch_size]
        if len(chunk) == 0:
            continue
        yield build_batch(
            split.x[chunk].astype(np.float64),
            split.y[chunk],
            rng,
            aug,
            raw_ids=chunk,
        )


def quantize_to_storage(*models) -> None:
    """Round parameters to float32 so in-memory weights match checkpoint
    bytes exactly; training always ends with this before returning."""
    for model in models:
        if model is None:
            continue
        for p in model.parameters():
            p.data = p.data.astype("<f4").astype(np.float64)


@dataclass
class PartnerResult:
    encoder: Encoder
    metrics: MetricsLogger
    checkpoint: Path | None = None


def train_partner(
    base: Split,
    cfg: TrainConfig,
    enc_cfg: EncoderConfig | None = None,
    aug: AugmentConfig | None = None,
    out_dir=None,
    objective: str | None = None,
    hidden_dims: tuple[int, ...] = (64, 64),
    embed_dim: int = 32,
) -> PartnerResult:
    """Stage one: contrastive training of the partner encoder.

    ``objective`` is "supct" unless the variant dictates otherwise
    ("ct" for the unsupervised-partner row).
    """
    if objective is None:
        objective = "ct" if cfg.variant == Variant.PARTNER_CT else "supct"
    if objective not in ("supct", "ct"):
        raise ParameterError(f"partner objective must be supct|ct, got {objective!r}")
    if len(base.classes) < 2:
        logger.warning(
            "train_partner: single-class data; every batch is all-positive and "
            "the contrastive objective is degenerate"
        )
    streams = _seed_streams(cfg)
    aug = aug if aug is not None else AugmentConfig()
    if enc_cfg is None:
        enc_cfg = default_encoder_config(
            base.dim, _seed_int(streams["partner_init"]), hidden_dims, embed_dim
        )
    enc = Encoder(enc_cfg)
    opt = SGD(enc.parameters(), momentum=cfg.momentum)
    data_rng = np.random.default_rng(streams["partner_data"])
    schedule = WarmupSchedule(cfg.warmup_epochs)
    metrics = MetricsLogger()

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        for step, batch in enumerate(_iter_batches(base, cfg, data_rng, aug)):
            z = enc.embed(batch.inputs)
            if objective == "supct":
                view = ContrastiveBatchView.supervised(z, batch.labels, cfg.tau)
                result = supct_loss(view)
            else:
                view = ContrastiveBatchView.unsupervised(z, batch.labels, cfg.tau)
                result = ct_loss(view)
            total = scale(result.loss, 1.0 / batch.size)
            opt.zero_grad()
            backward(total)
            opt.step(lr, cfg.weight_decay)
            metrics.log(
                epoch=epoch,
                step=step,
                lr=lr,
                loss_total=float(total),
                w_logit=schedule(epoch),
                skipped_positive_instances=result.skipped,
                loss_aux=float(total),
            )

    quantize_to_storage(enc)
    checkpoint = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        checkpoint = out / "partner_encoder.palw"
        save_encoder(enc, checkpoint)
        metrics.write_csv(out / "metrics_partner.csv")
    return PartnerResult(encoder=enc, metrics=metrics, checkpoint=checkpoint)


@dataclass(frozen=True)
class _MainFlags:
    use_ce: bool = True
    use_feat: bool = False
    align: str = "none"  # none | logit | kl
    aux_supct: bool = False


_VARIANT_FLAGS = {
    Variant.PAL: _MainFlags(use_feat=True, align="logit"),
    Variant.PARTNER_CT: _MainFlags(use_feat=True, align="logit"),
    Variant.PARTNER_CE: _MainFlags(use_feat=True, align="logit"),
    Variant.PAL_LOGIT_ONLY: _MainFlags(align="logit"),
    Variant.PAL_FEAT_ONLY: _MainFlags(use_feat=True),
    Variant.PAL_KL_LOGIT: _MainFlags(align="kl"),
    Variant.PAL_FEAT_KL: _MainFlags(use_feat=True, align="kl"),
    Variant.CE_ONLY: _MainFlags(),
    Variant.MULTITASK: _MainFlags(aux_supct=True),
}


@dataclass
class MainResult:
    encoder: Encoder
    classifier: CosineClassifier | None
    metrics: MetricsLogger
    encoder_checkpoint: Path | None = None
    classifier_checkpoint: Path | None = None


def train_main(
    base: Split,
    cfg: TrainConfig,
    partner: Encoder | None = None,
    enc_cfg: EncoderConfig | None = None,
    aug: AugmentConfig | None = None,
    out_dir=None,
    flags: _MainFlags | None = None,
    classifier_scale: float = 10.0,
    hidden_dims: tuple[int, ...] = (64, 64),
    embed_dim: int = 32,
) -> MainResult:
    """Stage two: train the main encoder (and classifier) under
    ``L = L_CE + L_feat + w(epoch) * L_align`` per the active variant."""
    if flags is None:
        if cfg.variant not in _VARIANT_FLAGS:
            raise ParameterError(
                f"variant {cfg.variant.value} is not a main-encoder variant"
            )
        flags = _VARIANT_FLAGS[cfg.variant]
    needs_partner = flags.use_feat or flags.align != "none"
    if needs_partner:
        if partner is None:
            raise ContractError("this variant needs a partner encoder")
        if not partner.frozen:
            raise ContractError("the partner encoder must be frozen before main training")

    streams = _seed_streams(cfg)
    aug = aug if aug is not None else AugmentConfig()
    if enc_cfg is None:
        enc_cfg = default_encoder_config(
            base.dim, _seed_int(streams["main_init"]), hidden_dims, embed_dim
        )
    enc = Encoder(enc_cfg)

    class_list = np.sort(base.classes)
    clf = None
    if flags.use_ce:
        clf = CosineClassifier(
            n_classes=len(class_list),
            embed_dim=enc_cfg.embed_dim,
            scale=classifier_scale,
            seed=_seed_int(streams["classifier_init"]),
        )
    params = enc.parameters() + (clf.parameters() if clf else [])
    opt = SGD(params, momentum=cfg.momentum, classifier=clf)
    data_rng = np.random.default_rng(streams["main_data"])
    anchor_rng = np.random.default_rng(streams["anchors"])
    schedule = WarmupSchedule(cfg.warmup_epochs)
    metrics = MetricsLogger()

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        w = schedule(epoch)
        for step, batch in enumerate(_iter_batches(base, cfg, data_rng, aug)):
            per = 1.0 / batch.size
            z_main = enc.embed(batch.inputs)
            logits = clf.logits(z_main) if clf else None
            z_partner = partner.encode(batch.inputs) if needs_partner else None

            total = Tensor(0.0)
            loss_ce = loss_feat = loss_align = loss_aux = 0.0
            skipped = 0

            if flags.use_ce:
                labels_idx = np.searchsorted(class_list, batch.labels)
                l_ce = scale(ce_loss_batch(logits, labels_idx), per)
                loss_ce = float(l_ce)
                total = total + l_ce
            if flags.use_feat:
                anchors = sample_anchor_sets(
                    partner, batch, anchor_rng, n_pos=cfg.n_pos, n_neg=cfg.n_neg
                )
                result = feat_align_loss(z_main, anchors, cfg.tau)
                l_feat = scale(result.loss, per)
                loss_feat = float(l_feat)
                skipped += result.skipped
                total = total + l_feat
            if flags.align == "logit":
                l_align = scale(
                    logit_align_loss_batch(
                        clf, z_partner[batch.view_map], logits, cfg.logit_temperature
                    ),
                    per,
                )
                loss_align = float(l_align)
                total = total + scale(l_align, w)
            elif flags.align == "kl":
                p_t = softmax_temperature(clf.logits(z_partner), cfg.kl_temperature)
                p_s = softmax_temperature(logits, cfg.kl_temperature)
                l_align = scale(kl_loss_batch(p_t, p_s), per)
                loss_align = float(l_align)
                total = total + scale(l_align, w)
            if flags.aux_supct:
                view = ContrastiveBatchView.supervised(z_main, batch.labels, cfg.tau)
                result = supct_loss(view)
                l_aux = scale(result.loss, per)
                loss_aux = float(l_aux)
                skipped += result.skipped
                total = total + l_aux

            opt.zero_grad()
            backward(total)
            opt.step(lr, cfg.weight_decay)
            metrics.log(
                epoch=epoch,
                step=step,
                lr=lr,
                loss_total=float(total),
                loss_ce=loss_ce,
                loss_feat=loss_feat,
                loss_logit=loss_align,
                w_logit=w,
                skipped_positive_instances=skipped,
                loss_aux=loss_aux,
            )

    quantize_to_storage(enc, clf)
    enc_path = clf_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        enc_path = out / "main_encoder.palw"
        save_encoder(enc, enc_path)
        if clf is not None:
            clf_path = out / "main_classifier.palw"
            save_classifier(clf, clf_path)
        metrics.write_csv(out / "metrics_main.csv")
    return MainResult(
        encoder=enc,
        classifier=clf,
        metrics=metrics,
        encoder_checkpoint=enc_path,
        classifier_checkpoint=clf_path,
    )


def _train_mutual(
    base: Split,
    cfg: TrainConfig,
    aug: AugmentConfig,
    out_dir,
    classifier_scale: float,
    hidden_dims: tuple[int, ...],
    embed_dim: int,
) -> "VariantResult":
    """Joint training of two peers from scratch: one under the contrastive
    objective, one under cross-entropy, aligned through symmetric KL on
    their plain class-probability outputs (mutual-learning convention:
    temperature 1); the cross-entropy model is evaluated."""
    streams = _seed_streams(cfg)
    enc_a = Encoder(
        default_encoder_config(base.dim, _seed_int(streams["partner_init"]), hidden_dims, embed_dim)
    )
    enc_b = Encoder(
        default_encoder_config(base.dim, _seed_int(streams["main_init"]), hidden_dims, embed_dim)
    )
    class_list = np.sort(base.classes)
    clf_a = CosineClassifier(
        len(class_list), enc_a.config.embed_dim, classifier_scale,
        seed=_seed_int(streams["second_init"]),
    )
    clf_b = CosineClassifier(
        len(class_list), enc_b.config.embed_dim, classifier_scale,
        seed=_seed_int(streams["classifier_init"]),
    )
    opt = SGD(
        enc_a.parameters() + clf_a.parameters() + enc_b.parameters() + clf_b.parameters(),
        momentum=cfg.momentum,
    )
    data_rng = np.random.default_rng(streams["main_data"])
    metrics = MetricsLogger()

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        for step, batch in enumerate(_iter_batches(base, cfg, data_rng, aug)):
            per = 1.0 / batch.size
            labels_idx = np.searchsorted(class_list, batch.labels)
            z_a = enc_a.embed(batch.inputs)
            z_b = enc_b.embed(batch.inputs)
            logits_a = clf_a.logits(z_a)
            logits_b = clf_b.logits(z_b)
            p_a_const = softmax_temperature(clf_a.logits(z_a.data), 1.0)
            p_b_const = softmax_temperature(clf_b.logits(z_b.data), 1.0)

            view = ContrastiveBatchView.supervised(z_a, batch.labels, cfg.tau)
            supct_result = supct_loss(view)
            l_supct = scale(supct_result.loss, per)
            l_kl_a = scale(kl_loss_batch(p_b_const, softmax_temperature(logits_a, 1.0)), per)
            l_ce = scale(ce_loss_batch(logits_b, labels_idx), per)
            l_kl_b = scale(kl_loss_batch(p_a_const, softmax_temperature(logits_b, 1.0)), per)

            loss_a = l_supct + l_kl_a
            loss_b = l_ce + l_kl_b
            opt.zero_grad()
            backward(loss_a)
            backward(loss_b)
            opt.step(lr, cfg.weight_decay)
            clf_a.renormalize()
            clf_b.renormalize()
            metrics.log(
                epoch=epoch,
                step=step,
                lr=lr,
                loss_total=float(loss_a) + float(loss_b),
                loss_ce=float(l_ce),
                w_logit=1.0,
                skipped_positive_instances=supct_result.skipped,
                loss_aux=float(l_supct) + float(l_kl_a) + float(l_kl_b),
            )

    quantize_to_storage(enc_a, clf_a, enc_b, clf_b)
    enc_path = clf_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        enc_path = out / "main_encoder.palw"
        save_encoder(enc_b, enc_path)
        clf_path = out / "main_classifier.palw"
        save_classifier(clf_b, clf_path)
        save_encoder(enc_a, out / "peer_encoder.palw")
        metrics.write_csv(out / "metrics_main.csv")
    return VariantResult(
        variant=cfg.variant,
        encoder=enc_b,
        classifier=clf_b,
        partner=enc_a,
        metrics={"main": metrics},
        encoder_checkpoint=enc_path,
        classifier_checkpoint=clf_path,
    )


@dataclass
class VariantResult:
    variant: Variant
    encoder: Encoder  # the network used at evaluation time
    classifier: CosineClassifier | None
    partner: Encoder | None
    metrics: dict[str, MetricsLogger]
    encoder_checkpoint: Path | None = None
    classifier_checkpoint: Path | None = None
    partner_checkpoint: Path | None = None


def train_variant(
    base: Split,
    cfg: TrainConfig,
    aug: AugmentConfig | None = None,
    out_dir=None,
    classifier_scale: float = 10.0,
    hidden_dims: tuple[int, ...] = (64, 64),
    embed_dim: int = 32,
) -> VariantResult:
    """Run the full training scheme selected by ``cfg.variant`` and return
    the encoder to be evaluated plus everything trained along the way."""
    aug = aug if aug is not None else AugmentConfig()
    variant = cfg.variant
    net = dict(hidden_dims=tuple(hidden_dims), embed_dim=embed_dim)

    if variant == Variant.MUTUAL:
        return _train_mutual(
            base, cfg, aug, out_dir, classifier_scale, tuple(hidden_dims), embed_dim
        )

    if variant in (Variant.CE_ONLY, Variant.MULTITASK):
        main = train_main(base, cfg, partner=None, aug=aug, out_dir=out_dir,
                          classifier_scale=classifier_scale, **net)
        return VariantResult(
            variant=variant,
            encoder=main.encoder,
            classifier=main.classifier,
            partner=None,
            metrics={"main": main.metrics},
            encoder_checkpoint=main.encoder_checkpoint,
            classifier_checkpoint=main.classifier_checkpoint,
        )

    if variant == Variant.SUPCT_ONLY:
        part = train_partner(base, cfg, aug=aug, out_dir=None, objective="supct", **net)
        enc_path = None
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            enc_path = out / "main_encoder.palw"
            save_encoder(part.encoder, enc_path)
            part.metrics.write_csv(out / "metrics_main.csv")
        return VariantResult(
            variant=variant,
            encoder=part.encoder,
            classifier=None,
            partner=None,
            metrics={"main": part.metrics},
            encoder_checkpoint=enc_path,
        )

    if variant == Variant.REVERSE:
        # Cross-entropy first; its frozen features then anchor a
        # contrastively trained second network. Stage one runs under its own
        # derived seed so the two networks share neither init nor batch order.
        ce_cfg = replace(cfg, variant=Variant.CE_ONLY, seed=_stage1_seed(cfg))
        stage1 = train_main(base, ce_cfg, partner=None, aug=aug, out_dir=None,
                            classifier_scale=classifier_scale, **net)
        partner = stage1.encoder.freeze()
        stage2_flags = _MainFlags(use_ce=False, use_feat=True, align="none", aux_supct=True)
        main = train_main(
            base, cfg, partner=partner, aug=aug, out_dir=out_dir, flags=stage2_flags,
            classifier_scale=classifier_scale, **net,
        )
        partner_path = None
        if out_dir is not None:
            partner_path = Path(out_dir) / "partner_encoder.palw"
            save_encoder(partner, partner_path)
            stage1.metrics.write_csv(Path(out_dir) / "metrics_partner.csv")
        return VariantResult(
            variant=variant,
            encoder=main.encoder,
            classifier=None,
            partner=partner,
            metrics={"partner": stage1.metrics, "main": main.metrics},
            encoder_checkpoint=main.encoder_checkpoint,
            partner_checkpoint=partner_path,
        )

    # PAL family and partner-objective ablations: stage one then stage two.
    if variant == Variant.PARTNER_CE:
        ce_cfg = replace(cfg, variant=Variant.CE_ONLY, seed=_stage1_seed(cfg))
        stage1 = train_main(base, ce_cfg, partner=None, aug=aug, out_dir=None,
                            classifier_scale=classifier_scale, **net)
        partner = stage1.encoder.freeze()
        partner_metrics = stage1.metrics
    else:
        part = train_partner(base, cfg, aug=aug, out_dir=None, **net)
        partner = part.encoder.freeze()
        partner_metrics = part.metrics

    partner_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        partner_path = out / "partner_encoder.palw"
        save_encoder(partner, partner_path)
        partner_metrics.write_csv(out / "metrics_partner.csv")

    main = train_main(base, cfg, partner=partner, aug=aug, out_dir=out_dir,
                      classifier_scale=classifier_scale, **net)
    return VariantResult(
        variant=variant,
        encoder=main.encoder,
        classifier=main.classifier,
        partner=partner,
        metrics={"partner": partner_metrics, "main": main.metrics},
        encoder_checkpoint=main.encoder_checkpoint,
        classifier_checkpoint=main.classifier_checkpoint,
        partner_checkpoint=partner_path,
    )
