"""STBA objective, budget schedule, NES gradient estimator and attack loop.

The attack searches a smooth flow field that, applied to the image's
high-frequency component, flips the oracle's argmax. Gradients of the
expected loss w.r.t. the sampling mean are estimated from normalized
candidate losses times the Gaussian noise that produced each candidate.
"""

import base64
import math
from dataclasses import dataclass

import numpy as np

from . import imagecore, warp
from .imagecore import LabeledImage
from .oracle import CountingOracle

APPLY_TO_CHOICES = ("high_frequency", "low_frequency", "full_image")

LOSS_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    q_max: int = 1000
    n_sample: int = 10
    lr: float = 0.1
    sigma: float | None = None  # defaults to 2 * lr
    smooth_weight: float = 5.0  # weight on the flow-smoothness term
    xi_init: float = 0.1
    xi_max: float = 3.0
    adjust_num: int = 20
    kappa: float = 0.0
    seed: int = 0
    apply_to: str = "high_frequency"
    rescale_alpha: bool = False  # spread the budget ramp over T/adjust_num updates
    mu_init_scale: float | None = None  # defaults to xi_init / 10

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", 2.0 * self.lr)
        if self.mu_init_scale is None:
            object.__setattr__(self, "mu_init_scale", self.xi_init / 10.0)
        if not (self.q_max >= self.n_sample >= 2):
            raise ValueError("require q_max >= n_sample >= 2")
        if self.lr <= 0 or self.sigma <= 0:
            raise ValueError("lr and sigma must be positive")
        if self.smooth_weight < 0:
            raise ValueError("smoothness weight must be nonnegative")
        if not (0 <= self.xi_init <= self.xi_max):
            raise ValueError("require 0 <= xi_init <= xi_max")
        if self.adjust_num < 1:
            raise ValueError("adjust_num must be >= 1")
        if self.apply_to not in APPLY_TO_CHOICES:
            raise ValueError(f"apply_to must be one of {APPLY_TO_CHOICES}")


@dataclass
class ScheduleState:
    """Linear flow-budget ramp: xi grows by alpha per update, capped at xi_max."""

    xi: float
    xi_max: float
    alpha: float
    t: int = 0

    @classmethod
    def from_config(cls, cfg: AttackConfig) -> "ScheduleState":
        t_total = cfg.q_max // cfg.n_sample
        alpha = (cfg.xi_max - cfg.xi_init) / t_total if t_total > 0 else 0.0
        if cfg.rescale_alpha:
            updates = max(t_total // cfg.adjust_num, 1)
            alpha = (cfg.xi_max - cfg.xi_init) / updates
        return cls(xi=cfg.xi_init, xi_max=cfg.xi_max, alpha=alpha)

    def step(self) -> None:
        self.t += 1
        self.xi = min(self.xi + self.alpha, self.xi_max)


@dataclass
class AttackResult:
    success: bool
    queries_used: int
    iterations: int
    adversarial: np.ndarray
    final_flow: np.ndarray
    loss_trace: list[tuple[int, float, float, float]]
    xi_trace: list[tuple[int, float]]
    psnr: float
    ssim: float
    error: str | None = None


def adversarial_margin_loss(scores: np.ndarray, y: int, kappa: float = 0.0) -> float:
    """True-class score minus best other score, floored at kappa.

    Nonpositive margin means the oracle already misclassifies.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 2:
        raise ValueError("need at least 2 class scores")
    if not (0 <= y < scores.size):
        raise ValueError(f"label {y} out of range for {scores.size} classes")
    others = np.delete(scores, y)
    return max(float(scores[y] - others.max()), kappa)


def total_loss(
    scores: np.ndarray, y: int, flow: np.ndarray, cfg: AttackConfig
) -> tuple[float, float, float]:
    """Margin loss plus weighted flow smoothness; components kept for tracing."""
    adv = adversarial_margin_loss(scores, y, cfg.kappa)
    smooth = warp.flow_smoothness_loss(flow)
    return adv + cfg.smooth_weight * smooth, adv, smooth


def sample_flows(
    mu: np.ndarray, sigma: float, rng: np.random.Generator, n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n candidate flows mu + sigma*eps; returns (flows, eps)."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    eps = rng.standard_normal((n,) + mu.shape)
    return mu + sigma * eps, eps


def nes_gradient(losses: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Estimate the gradient w.r.t. the sampling mean from candidate losses.

    Losses are normalized by their sample mean and population std; a
    near-zero std zeroes the estimate (all candidates equally good).
    """
    losses = np.asarray(losses, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if losses.ndim != 1 or eps.shape[0] != losses.shape[0]:
        raise ValueError("losses and noise batches must have matching length")
    n = losses.shape[0]
    std = losses.std()
    if std < LOSS_STD_FLOOR:
        normalized = np.zeros_like(losses)
    else:
        normalized = (losses - losses.mean()) / std
    return np.tensordot(normalized, eps, axes=1) / n


def _candidate_builder(image: np.ndarray, apply_to: str):
    """Returns build(flow) -> displayable candidate image."""
    if apply_to == "high_frequency":
        high, low = imagecore.frequency_split(image)
        return lambda f: imagecore.recompose(warp.apply_flow(high, f), low)
    if apply_to == "low_frequency":
        high, low = imagecore.frequency_split(image)
        return lambda f: imagecore.recompose(high, warp.apply_flow(low, f))
    return lambda f: np.clip(warp.apply_flow(image, f), 0.0, 1.0)


def run_attack(oracle, item: LabeledImage, cfg: AttackConfig) -> AttackResult:
    """Full query-budgeted attack loop against a black-box scorer.

    Each iteration spends n_sample candidate queries plus one success-check
    query; an iteration never starts unless all n_sample + 1 evaluations fit
    in the remaining budget. Deterministic given (oracle, item, cfg).
    """
    image = imagecore.check_image(item.image)
    if tuple(image.shape) != tuple(oracle.input_shape):
        raise ValueError(
            f"image shape {image.shape} does not match oracle {oracle.input_shape}"
        )
    counted = CountingOracle(oracle, limit=cfg.q_max)
    rng = np.random.default_rng(cfg.seed)
    _, h, w = image.shape
    mu = rng.normal(0.0, cfg.mu_init_scale, size=(2, h, w))
    schedule = ScheduleState.from_config(cfg)
    build = _candidate_builder(image, cfg.apply_to)

    loss_trace: list[tuple[int, float, float, float]] = []
    xi_trace: list[tuple[int, float]] = [(0, schedule.xi)]
    success = False
    error = None
    iteration = 0
    adversarial = build(warp.clip_flow(mu, schedule.xi))
    final_flow = warp.clip_flow(mu, schedule.xi)

    try:
        while counted.used + cfg.n_sample + 1 <= cfg.q_max:
            iteration += 1
            flows, eps = sample_flows(mu, cfg.sigma, rng, cfg.n_sample)
            losses = np.empty(cfg.n_sample)
            for k in range(cfg.n_sample):
                f_k = warp.clip_flow(flows[k], schedule.xi)
                scores = counted.predict(build(f_k))
                losses[k], _, _ = total_loss(scores, item.label, f_k, cfg)
            grad = nes_gradient(losses, eps)
            mu = mu - cfg.lr * grad

            if iteration % cfg.adjust_num == 0:
                schedule.step()
            xi_trace.append((iteration, schedule.xi))

            final_flow = warp.clip_flow(mu, schedule.xi)
            adversarial = build(final_flow)
            scores = counted.predict(adversarial)
            tot, adv_l, smooth_l = total_loss(scores, item.label, final_flow, cfg)
            loss_trace.append((iteration, tot, adv_l, smooth_l))
            if int(np.argmax(scores)) != item.label:
                success = True
                break
    except Exception as exc:  # transport failures abort with a partial trace
        from .errors import TransportError

        if isinstance(exc, TransportError):
            error = str(exc)
        else:
            raise

    return AttackResult(
        success=success,
        queries_used=counted.used,
        iterations=iteration,
        adversarial=adversarial,
        final_flow=final_flow,
        loss_trace=loss_trace,
        xi_trace=xi_trace,
        psnr=imagecore.psnr(image, adversarial),
        ssim=imagecore.ssim(image, adversarial),
        error=error,
    )


def _encode_array_f32(arr: np.ndarray) -> dict:
    data = np.asarray(arr, dtype="<f4").tobytes()
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(data).decode("ascii"),
    }


def decode_array_f32(doc: dict) -> np.ndarray:
    raw = base64.b64decode(doc["data"])
    return np.frombuffer(raw, dtype="<f4").reshape(doc["shape"]).astype(np.float64)


def result_to_dict(result: AttackResult) -> dict:
    """JSON-serializable view of an AttackResult."""
    return {
        "success": result.success,
        "queries_used": result.queries_used,
        "iterations": result.iterations,
        "adversarial": _encode_array_f32(result.adversarial),
        "final_flow": _encode_array_f32(result.final_flow),
        "loss_trace": [[i, t, a, s] for i, t, a, s in result.loss_trace],
        "xi_trace": [[i, x] for i, x in result.xi_trace],
        "psnr": "inf" if math.isinf(result.psnr) else result.psnr,
        "ssim": result.ssim,
        "error": result.error,
    }
