"""Adam optimizer and the joint training loop."""

import os

import numpy as np

from fdp.dynamics import rank_loss
from fdp.heads import dic_loss, full_loss, mer_loss, predicted_class
from fdp.model import FdpModel
from fdp.numerics import Tensor, backward


class NumericalFailure(FloatingPointError):
    """Non-finite loss or gradient during training."""


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.steps = 0

    def step(self):
        self.steps += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.steps
        bias2 = 1.0 - b2**self.steps
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def build_model(cfg, num_classes, seed=None):
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return FdpModel(
        rng,
        cfg.encoder_config(),
        cfg.head_config(num_classes),
        clip_frames=cfg.t,
    )


def compute_losses(model, clips, labels, targets, cfg):
    out = model.forward(Tensor(clips))
    l_mer = mer_loss(out.probs, labels)
    l_dic = dic_loss(out.dynamic_image, Tensor(targets))
    l_rank = rank_loss(out.rank_scores, cfg.rank_slope)
    total = full_loss(l_mer, l_dic, l_rank, cfg.lambda_d, cfg.lambda_r, cfg.lambda_mer)
    return total, l_mer, l_dic, l_rank, out


def train_model(model, store, indices, cfg, num_classes, log=None, seed=None):
    """Train in place; returns the per-epoch history.

    Every epoch logs one line with the mean losses and the accuracy of
    the predictions made during that epoch's forward passes.
    """
    check_finite = os.environ.get("FDP_CHECK_FINITE", "") == "1"
    rng = np.random.default_rng((cfg.seed if seed is None else seed) + 1)
    opt = Adam(model.parameters(), cfg.learning_rate)
    indices = np.asarray(indices, dtype=int)
    history = []
    model.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(indices)
        sums = np.zeros(4)
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            chunk = order[start : start + cfg.batch_size]
            clips, labels, targets = store.batch(
                chunk, cfg.t, cfg.crop, train=True, rng=rng, augment=cfg.augment
            )
            total, l_mer, l_dic, l_rank, out = compute_losses(
                model, clips, labels, targets, cfg
            )
            values = np.array(
                [total.item(), l_mer.item(), l_dic.item(), l_rank.item()]
            )
            if not np.all(np.isfinite(values)):
                raise NumericalFailure(
                    f"non-finite loss at epoch {epoch} batch {start // cfg.batch_size}: "
                    f"total={values[0]} mer={values[1]} dic={values[2]} rank={values[3]}"
                )
            model.zero_grad()
            backward(total)
            if check_finite:
                for name, p in model.named_parameters():
                    if p.grad is not None and not np.all(np.isfinite(p.grad)):
                        raise NumericalFailure(f"non-finite gradient in {name}")
            opt.step()
            sums += values * len(chunk)
            correct += int((predicted_class(out.probs) == labels).sum())
        n = len(order)
        record = {
            "epoch": epoch,
            "loss": sums[0] / n,
            "mer": sums[1] / n,
            "dic": sums[2] / n,
            "rank": sums[3] / n,
            "train_acc": correct / n,
        }
        history.append(record)
        if log is not None:
            log(
                "epoch=%03d loss=%.6f mer=%.6f dic=%.6f rank=%.6f train_acc=%.4f"
                % (
                    record["epoch"],
                    record["loss"],
                    record["mer"],
                    record["dic"],
                    record["rank"],
                    record["train_acc"],
                )
            )
    return history


def predict(model, store, indices, cfg, batch_size=16):
    """Eval-mode predictions: (classes, probs, rank scores, dyn images, targets, labels)."""
    from fdp.numerics import no_grad

    model.eval()
    indices = np.asarray(indices, dtype=int)
    classes, probs, scores, dyn, targets, labels = [], [], [], [], [], []
    with no_grad():
        for start in range(0, len(indices), batch_size):
            chunk = indices[start : start + batch_size]
            clips, lab, targ = store.batch(chunk, cfg.t, cfg.crop, train=False)
            out = model.forward(Tensor(clips))
            classes.append(predicted_class(out.probs))
            probs.append(out.probs.data)
            scores.append(out.rank_scores.data)
            dyn.append(out.dynamic_image.data)
            targets.append(targ)
            labels.append(lab)
    cat = lambda parts: np.concatenate(parts, axis=0)
    return (
        cat(classes),
        cat(probs),
        cat(scores),
        cat(dyn),
        cat(targets),
        cat(labels),
    )
