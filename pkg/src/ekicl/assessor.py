"""Trainable transcript assessor: token contributions and confidence.

A linear probe scores every token's contribution; a noise channel built
on the Gumbel-Softmax trick resamples each token as a convex mixture of
the other tokens in the same transcript; the perturbed token matrix is
max-pooled and passed through a one-hidden-layer MLP with sigmoid output
to give the transcript-level confidence that the speaker is impaired.

Training minimizes binary cross-entropy (impaired class = 1) with the
Adam update rule over analytically derived gradients: through the output
sigmoid, the ReLU hidden layer, the max-pool (subgradient routed to the
argmax row per dimension), the convex token mixture, and the probe
sigmoid. Noise is frozen within each step, so the loss is deterministic
given the seed and gradients are checkable by central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np

from .embeddings import EmbeddedTranscript
from .errors import DataError

Mode = Literal["train-with-noise", "eval-clean"]

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_INIT_SCALE = 0.05


@dataclass(frozen=True)
class AssessorParams:
    w: np.ndarray  # (D,) probe weights
    b: float
    W1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (H,)
    b2: float
    temp: float
    seed: int

    def __post_init__(self) -> None:
        for name in ("w", "W1", "b1", "W2"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=np.float64)
            )
        if self.temp <= 0:
            raise DataError("temperature must be positive")
        if self.W1.ndim != 2 or self.W1.shape[0] < 1:
            raise DataError("hidden layer must have at least one unit")
        arrays = [self.w, np.array(self.b), self.W1, self.b1, self.W2, np.array(self.b2)]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise DataError("assessor parameters must be finite")
        h, d = self.W1.shape
        if self.w.shape != (d,) or self.b1.shape != (h,) or self.W2.shape != (h,):
            raise DataError("assessor parameter shapes are inconsistent")

    @property
    def dim(self) -> int:
        return int(self.W1.shape[1])

    @property
    def hidden(self) -> int:
        return int(self.W1.shape[0])


@dataclass(frozen=True)
class AssessorOutput:
    p: np.ndarray  # per-token contributions, each in (0, 1)
    s_conf: float
    pooled: np.ndarray  # (D,) max-pooled representation


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 200
    batch: int = 16
    temp: float = 1.0
    seed: int = 0
    hidden: int = 64


@dataclass(frozen=True)
class TrainResult:
    params: AssessorParams
    epoch_losses: list[float]


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def judge(e: np.ndarray, params: AssessorParams) -> float:
    """Token contribution: sigmoid of the probe's affine response."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != params.w.shape:
        raise DataError(f"embedding dim {e.shape} != probe dim {params.w.shape}")
    return float(sigmoid(params.w @ e + params.b))


def inject_noise(
    E: np.ndarray, i: int, temp: float, rng: np.random.Generator
) -> np.ndarray:
    """Noise vector for token i: Gumbel-Softmax mixture of the other tokens.

    Logits are dot products of token i with each other token; one Gumbel(0,1)
    draw per candidate comes from ``rng``.
    """
    E = np.asarray(E, dtype=np.float64)
    n = E.shape[0]
    if n < 2:
        raise DataError("no noise candidates: transcript has a single token")
    others = np.delete(np.arange(n), i)
    logits = E[others] @ E[i]
    gumbel = rng.gumbel(size=n - 1)
    scores = (logits + gumbel) / temp
    scores -= scores.max()
    y = np.exp(scores)
    y /= y.sum()
    return y @ E[others]


def perturb(e: np.ndarray, e_noise: np.ndarray, p: float) -> np.ndarray:
    """Convex mixture p*e + (1-p)*e_noise."""
    e = np.asarray(e, dtype=np.float64)
    e_noise = np.asarray(e_noise, dtype=np.float64)
    if e.shape != e_noise.shape:
        raise DataError("mixture endpoints must share a shape")
    return p * e + (1.0 - p) * e_noise


def confidence(
    E_tilde: np.ndarray, params: AssessorParams
) -> tuple[np.ndarray, float]:
    """Max-pool the (possibly perturbed) token matrix and apply the MLP head."""
    E_tilde = np.asarray(E_tilde, dtype=np.float64)
    if E_tilde.ndim != 2 or E_tilde.shape[0] < 1:
        raise DataError("confidence requires at least one token row")
    z = E_tilde.max(axis=0)
    hidden = np.maximum(params.W1 @ z + params.b1, 0.0)
    s = float(sigmoid(params.W2 @ hidden + params.b2))
    return z, s


def forward(
    transcript: EmbeddedTranscript,
    params: AssessorParams,
    mode: Mode = "eval-clean",
    rng: Optional[np.random.Generator] = None,
) -> AssessorOutput:
    """Full assessor pass over one transcript.

    train-with-noise composes judge -> inject_noise -> perturb per token
    before pooling; eval-clean pools the raw embeddings (contributions are
    still computed for downstream use). The eval path is a pure function
    of (transcript, params).
    """
    E = transcript.vectors
    if E.shape[0] < 1:
        raise DataError(f"{transcript.transcript_id}: empty transcript")
    p = sigmoid(E @ params.w + params.b)
    if mode == "eval-clean":
        z, s = confidence(E, params)
        return AssessorOutput(p=p, s_conf=s, pooled=z)
    if mode != "train-with-noise":
        raise DataError(f"unknown forward mode {mode!r}")
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(params.seed))
    mixed = np.empty_like(E)
    for i in range(E.shape[0]):
        noise = inject_noise(E, i, params.temp, rng)
        mixed[i] = perturb(E[i], noise, float(p[i]))
    z, s = confidence(mixed, params)
    return AssessorOutput(p=p, s_conf=s, pooled=z)


# ---------------------------------------------------------------------------
# Training internals: vectorized forward/backward with frozen noise
# ---------------------------------------------------------------------------


def _draw_gumbel(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.gumbel(size=(n, n))


def _noise_matrix(E: np.ndarray, temp: float, gumbel: np.ndarray) -> np.ndarray:
    """All tokens' noise vectors at once; row i mixes the other tokens."""
    n = E.shape[0]
    if n < 2:
        raise DataError("no noise candidates: transcript has a single token")
    scores = (E @ E.T + gumbel) / temp
    np.fill_diagonal(scores, -np.inf)
    scores -= scores.max(axis=1, keepdims=True)
    y = np.exp(scores)
    y /= y.sum(axis=1, keepdims=True)
    return y @ E


def _loss_and_grads(
    E: np.ndarray,
    label: float,
    params: AssessorParams,
    gumbel: np.ndarray,
    want_grads: bool = True,
) -> tuple[float, Optional[dict[str, np.ndarray]]]:
    """BCE loss for one transcript and, optionally, gradients for every parameter."""
    pre = E @ params.w + params.b
    p = sigmoid(pre)
    noise = _noise_matrix(E, params.temp, gumbel)
    mixed = p[:, None] * E + (1.0 - p)[:, None] * noise
    argmax = mixed.argmax(axis=0)
    z = mixed[argmax, np.arange(E.shape[1])]
    u = params.W1 @ z + params.b1
    h = np.maximum(u, 0.0)
    a = float(params.W2 @ h + params.b2)
    # BCE from the logit: softplus(a) - y*a, stable for either sign.
    loss = float(np.logaddexp(0.0, a) - label * a)
    if not want_grads:
        return loss, None

    da = float(sigmoid(a)) - label
    d_W2 = da * h
    d_b2 = da
    dh = da * params.W2
    du = dh * (u > 0)
    d_W1 = np.outer(du, z)
    d_b1 = du
    dz = params.W1.T @ du
    dp = np.zeros(E.shape[0])
    np.add.at(dp, argmax, dz * (E - noise)[argmax, np.arange(E.shape[1])])
    dpre = dp * p * (1.0 - p)
    d_w = E.T @ dpre
    d_b = float(dpre.sum())
    return loss, {
        "w": d_w,
        "b": np.array(d_b),
        "W1": d_W1,
        "b1": d_b1,
        "W2": d_W2,
        "b2": np.array(d_b2),
    }


def _label_value(rec: EmbeddedTranscript) -> float:
    if rec.gold_label == "AD":
        return 1.0
    if rec.gold_label == "HC":
        return 0.0
    raise DataError(f"{rec.transcript_id}: training requires a gold label")


def init_params(dim: int, config: TrainConfig) -> AssessorParams:
    """Seeded uniform(-0.05, 0.05) initialization of every parameter."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    u = lambda *shape: rng.uniform(-_INIT_SCALE, _INIT_SCALE, size=shape)
    return AssessorParams(
        w=u(dim),
        b=float(u()),
        W1=u(config.hidden, dim),
        b1=u(config.hidden),
        W2=u(config.hidden),
        b2=float(u()),
        temp=config.temp,
        seed=config.seed,
    )


def train(
    corpus: Sequence[EmbeddedTranscript], config: TrainConfig = TrainConfig()
) -> TrainResult:
    """Minibatch Adam on BCE; deterministic given the seed.

    Returns the final parameters plus the mean training loss per epoch.
    Zero epochs returns the freshly initialized parameters unchanged.
    """
    if len(corpus) < 2:
        raise DataError("training needs at least two transcripts")
    labels = np.array([_label_value(rec) for rec in corpus])
    if len(set(labels.tolist())) < 2:
        raise DataError("degenerate training set: only one class present")
    dims = {rec.dim for rec in corpus}
    if len(dims) != 1:
        raise DataError(f"inconsistent embedding dimensions {sorted(dims)}")

    params = init_params(dims.pop(), config)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    rng.bit_generator.advance(1 << 20)  # decouple the step stream from init draws

    names = ("w", "b", "W1", "b1", "W2", "b2")
    moment1 = {k: np.zeros_like(np.asarray(getattr(params, k), dtype=np.float64)) for k in names}
    moment2 = {k: np.zeros_like(v) for k, v in moment1.items()}
    step = 0
    losses: list[float] = []

    for _ in range(config.epochs):
        order = rng.permutation(len(corpus))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch):
            batch = order[start : start + config.batch]
            grads = {k: np.zeros_like(v) for k, v in moment1.items()}
            batch_loss = 0.0
            for idx in batch:
                rec = corpus[idx]
                gumbel = _draw_gumbel(rng, len(rec.tokens))
                loss, g = _loss_and_grads(rec.vectors, labels[idx], params, gumbel)
                batch_loss += loss
                for k in names:
                    grads[k] += g[k]
            scale = 1.0 / len(batch)
            epoch_loss += batch_loss
            step += 1
            updates = {}
            for k in names:
                grad = grads[k] * scale
                moment1[k] = _ADAM_BETA1 * moment1[k] + (1 - _ADAM_BETA1) * grad
                moment2[k] = _ADAM_BETA2 * moment2[k] + (1 - _ADAM_BETA2) * grad**2
                m_hat = moment1[k] / (1 - _ADAM_BETA1**step)
                v_hat = moment2[k] / (1 - _ADAM_BETA2**step)
                current = np.asarray(getattr(params, k), dtype=np.float64)
                updates[k] = current - config.lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
            params = replace(
                params,
                w=updates["w"],
                b=float(updates["b"]),
                W1=updates["W1"],
                b1=updates["b1"],
                W2=updates["W2"],
                b2=float(updates["b2"]),
            )
        losses.append(epoch_loss / len(corpus))
    return TrainResult(params=params, epoch_losses=losses)


def grad_check(
    params: AssessorParams, transcript: EmbeddedTranscript, step: float
) -> float:
    """Max guarded relative error between analytic and central-difference gradients.

    Noise is frozen (one Gumbel matrix drawn from the params seed) so both
    sides differentiate the same function. The denominator is floored at
    1e-4 to keep dead-unit zero gradients from dividing by zero.
    """
    if step <= 0:
        raise DataError("invalid step: must be positive")
    label = _label_value(transcript)
    E = transcript.vectors
    rng = np.random.Generator(np.random.PCG64(params.seed))
    gumbel = _draw_gumbel(rng, E.shape[0])

    _, grads = _loss_and_grads(E, label, params, gumbel)
    names = ("w", "b", "W1", "b1", "W2", "b2")
    flat_analytic = np.concatenate(
        [np.asarray(grads[k], dtype=np.float64).ravel() for k in names]
    )

    theta0 = np.concatenate(
        [np.asarray(getattr(params, k), dtype=np.float64).ravel() for k in names]
    )
    shapes = [np.asarray(getattr(params, k)).shape for k in names]

    def unflatten(theta: np.ndarray) -> AssessorParams:
        pieces = {}
        offset = 0
        for k, shape in zip(names, shapes):
            size = int(np.prod(shape)) if shape else 1
            chunk = theta[offset : offset + size]
            pieces[k] = chunk.reshape(shape) if shape else float(chunk[0])
            offset += size
        return replace(params, **pieces)

    numeric = np.empty_like(theta0)
    for k in range(theta0.size):
        bump = np.zeros_like(theta0)
        bump[k] = step
        hi, _ = _loss_and_grads(E, label, unflatten(theta0 + bump), gumbel, want_grads=False)
        lo, _ = _loss_and_grads(E, label, unflatten(theta0 - bump), gumbel, want_grads=False)
        numeric[k] = (hi - lo) / (2.0 * step)

    denom = np.maximum(np.maximum(np.abs(flat_analytic), np.abs(numeric)), 1e-4)
    return float(np.max(np.abs(flat_analytic - numeric) / denom))


def classification_accuracy(
    corpus: Sequence[EmbeddedTranscript],
    params: AssessorParams,
    threshold: float = 0.5,
) -> float:
    """Percent of transcripts where thresholded eval-mode confidence hits the gold label."""
    if not corpus:
        raise DataError("no transcripts to score")
    hits = 0
    for rec in corpus:
        label = _label_value(rec)
        s = forward(rec, params, mode="eval-clean").s_conf
        hits += (s >= threshold) == bool(label)
    return 100.0 * hits / len(corpus)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: AssessorParams, path: str | Path) -> None:
    doc = {
        "kind": "assessor-checkpoint",
        "dim": params.dim,
        "hidden": params.hidden,
        "temp": params.temp,
        "seed": params.seed,
        "w": params.w.tolist(),
        "b": params.b,
        "W1": params.W1.tolist(),
        "b1": params.b1.tolist(),
        "W2": params.W2.tolist(),
        "b2": params.b2,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> AssessorParams:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid checkpoint JSON: {exc}") from exc
    if doc.get("kind") != "assessor-checkpoint":
        raise DataError(f"{path}: not an assessor checkpoint")
    try:
        return AssessorParams(
            w=np.array(doc["w"], dtype=np.float64),
            b=float(doc["b"]),
            W1=np.array(doc["W1"], dtype=np.float64),
            b1=np.array(doc["b1"], dtype=np.float64),
            W2=np.array(doc["W2"], dtype=np.float64),
            b2=float(doc["b2"]),
            temp=float(doc["temp"]),
            seed=int(doc["seed"]),
        )
    except KeyError as exc:
        raise DataError(f"{path}: checkpoint missing field {exc}") from exc
