"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026

Randomized checks of the identities, bounds and analytic gradients the
losses rely on. Each check samples with a fixed seed and reports how many
points it evaluated, how many passed, and the worst violation seen.
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from losses import LossKind, LossSpec, ce, evaluate, fl, ls
from mlp import backward, forward, init_mlp
from numerics import _entropy, _kl_uniform_from_log, _log_softmax, _logit_distances, bound_sides

logger = logging.getLogger(__name__)

BOUND_TOLERANCE = 1e-9
GRAD_STEP = 1e-5
GRAD_TOLERANCE = 1e-5
KINK_GAP = 1e-3
LOGIT_SCALE = 3.0


class PropertyResult(BaseModel):
    name: str
    checked: int
    passed: int
    skipped: int = 0
    worst: float = 0.0

    @property
    def ok(self) -> bool:
        return self.checked > 0 and self.passed == self.checked


# Loss settings exercised by the gradient checks, one per kind
GRADIENT_SPECS: Dict[str, LossSpec] = {
    "CE": LossSpec(kind=LossKind.CE),
    "LS": LossSpec(kind=LossKind.LS, alpha=0.1),
    "FL": LossSpec(kind=LossKind.FL, gamma=3.0),
    "FLSD": LossSpec(kind=LossKind.FLSD),
    "ECP": LossSpec(kind=LossKind.ECP, ecp_weight=0.1),
    "MBLS": LossSpec(kind=LossKind.MBLS, margin=2.0, lambda_=0.1),
}


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """||a - n|| / max(||a|| + ||n||, 1e-12) along the last axis."""
    diff = np.linalg.norm(analytic - numeric, axis=-1)
    scale = np.linalg.norm(analytic, axis=-1) + np.linalg.norm(numeric, axis=-1)
    return diff / np.maximum(scale, 1e-12)


def numeric_logit_grad(spec: LossSpec, logits: np.ndarray, labels: np.ndarray, h: float = GRAD_STEP) -> np.ndarray:
    """Central differences of the per-sample loss, one class column at a time."""
    grads = np.empty_like(logits)
    for k in range(logits.shape[1]):
        shifted = logits.copy()
        shifted[:, k] += h
        upper = evaluate(spec, shifted, labels).value
        shifted[:, k] -= 2 * h
        lower = evaluate(spec, shifted, labels).value
        grads[:, k] = (upper - lower) / (2 * h)
    return grads


def near_kink(spec: LossSpec, logits: np.ndarray, labels: np.ndarray, gap: float = KINK_GAP) -> np.ndarray:
    """Rows where a finite-difference step could cross a non-smooth point of the loss."""
    logits = np.atleast_2d(logits)
    excluded = np.zeros(logits.shape[0], dtype=bool)
    if spec.kind == LossKind.MBLS:
        distances = _logit_distances(logits)
        excluded |= np.any((np.abs(distances - spec.margin) < gap) & (distances > 0), axis=1)
        top_two = np.sort(logits, axis=1)[:, -2:]
        excluded |= (top_two[:, 1] - top_two[:, 0]) < gap
    if spec.kind == LossKind.FLSD:
        p = np.exp(_log_softmax(logits)[np.arange(logits.shape[0]), labels])
        excluded |= np.abs(p - spec.threshold) < gap
    return excluded


def _random_batch(rng: np.random.Generator, n: int, k: int):
    logits = rng.normal(0.0, LOGIT_SCALE, size=(n, k))
    labels = rng.integers(0, k, size=n)
    return logits, labels


def _class_counts(rng: np.random.Generator, total: int, k_min: int, k_max: int) -> Dict[int, int]:
    sizes = rng.integers(k_min, k_max + 1, size=total)
    values, counts = np.unique(sizes, return_counts=True)
    return dict(zip(values.tolist(), counts.tolist()))


def check_logit_bound_sandwich(seed: int = 0, n: int = 100_000, k_max: int = 100) -> PropertyResult:
    """KL(u||s) <= mean(d) <= KL(u||s) + log K on random logits."""
    rng = np.random.default_rng(seed)
    passed, worst = 0, 0.0
    for k, count in _class_counts(rng, n, 2, k_max).items():
        logits = rng.normal(0.0, LOGIT_SCALE, size=(count, k))
        mean_distance, kl_uniform = bound_sides(logits)
        slack = np.minimum(mean_distance - kl_uniform, kl_uniform + np.log(k) - mean_distance)
        passed += int(np.sum(slack >= -BOUND_TOLERANCE))
        worst = min(worst, float(np.min(slack)))
    return PropertyResult(name="logit-distance sandwich", checked=n, passed=passed, worst=worst)


def check_ls_decomposition(seed: int = 0, n: int = 10_000, k_max: int = 100) -> PropertyResult:
    """LS = (1 - a) CE + a KL(u||s) + a log K."""
    rng = np.random.default_rng(seed + 1)
    passed, worst = 0, 0.0
    for k, count in _class_counts(rng, n, 2, k_max).items():
        logits, labels = _random_batch(rng, count, k)
        alphas = rng.choice([0.05, 0.1, 0.3], size=count)
        log_probs = _log_softmax(logits)
        base = ce(logits, labels).value
        kl = _kl_uniform_from_log(log_probs)
        for alpha in np.unique(alphas):
            rows = alphas == alpha
            smoothed = ls(logits[rows], labels[rows], float(alpha)).value
            expected = (1 - alpha) * base[rows] + alpha * kl[rows] + alpha * np.log(k)
            gap = np.abs(smoothed - expected)
            passed += int(np.sum(gap <= BOUND_TOLERANCE))
            worst = max(worst, float(np.max(gap)))
    return PropertyResult(name="label smoothing = CE + KL", checked=n, passed=passed, worst=worst)


def check_focal_bound(seed: int = 0, n: int = 10_000, k_max: int = 100) -> PropertyResult:
    """FL >= CE - gamma H(s)."""
    rng = np.random.default_rng(seed + 2)
    passed, worst = 0, 0.0
    for k, count in _class_counts(rng, n, 2, k_max).items():
        logits, labels = _random_batch(rng, count, k)
        gammas = rng.choice([1.0, 2.0, 3.0, 5.0], size=count)
        base = ce(logits, labels).value
        ent = np.atleast_1d(_entropy(np.exp(_log_softmax(logits))))
        for gamma in np.unique(gammas):
            rows = gammas == gamma
            slack = fl(logits[rows], labels[rows], float(gamma)).value - (base[rows] - gamma * ent[rows])
            passed += int(np.sum(slack >= -BOUND_TOLERANCE))
            worst = min(worst, float(np.min(slack)))
    return PropertyResult(name="focal loss lower bound", checked=n, passed=passed, worst=worst)


def check_entropy_identity(seed: int = 0, n: int = 10_000, k_max: int = 100) -> PropertyResult:
    """-H(s) = KL(s||u) - log K."""
    rng = np.random.default_rng(seed + 3)
    passed, worst = 0, 0.0
    for k, count in _class_counts(rng, n, 2, k_max).items():
        log_probs = _log_softmax(rng.normal(0.0, LOGIT_SCALE, size=(count, k)))
        probs = np.exp(log_probs)
        ent = np.atleast_1d(_entropy(probs))
        kl_to_u = np.sum(probs * (log_probs + np.log(k)), axis=1)
        gap = np.abs(-ent - (kl_to_u - np.log(k)))
        passed += int(np.sum(gap <= BOUND_TOLERANCE))
        worst = max(worst, float(np.max(gap)))
    return PropertyResult(name="entropy = log K - KL(s||u)", checked=n, passed=passed, worst=worst)


def check_logit_gradients(name: str, spec: LossSpec, seed: int = 0, n: int = 100,
                          grad_perturbation: float = 0.0) -> PropertyResult:
    """Analytic logit gradients against central differences (K in 2..50)."""
    rng = np.random.default_rng(seed + 10)
    checked = passed = skipped = 0
    worst = 0.0
    while checked < n:
        k = int(rng.integers(2, 51))
        logits, labels = _random_batch(rng, 1, k)
        if near_kink(spec, logits, labels)[0]:
            skipped += 1
            continue
        analytic = evaluate(spec, logits, labels).grad + grad_perturbation
        numeric = numeric_logit_grad(spec, logits, labels)
        error = float(relative_error(analytic, numeric)[0])
        checked += 1
        passed += int(error <= GRAD_TOLERANCE)
        worst = max(worst, error)
    return PropertyResult(name=f"{name} logit gradient", checked=checked, passed=passed,
                          skipped=skipped, worst=worst)


def numeric_parameter_grads(model, x: np.ndarray, y: np.ndarray, spec: LossSpec,
                            h: float = GRAD_STEP) -> List[np.ndarray]:
    grads = []
    for param in model.parameters():
        grad = np.empty_like(param)
        flat = param.reshape(-1)
        out = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            upper, _ = backward(model, x, y, spec)
            flat[i] = original - h
            lower, _ = backward(model, x, y, spec)
            flat[i] = original
            out[i] = (upper - lower) / (2 * h)
        grads.append(grad)
    return grads


def _hidden_near_zero(model, x: np.ndarray, gap: float = KINK_GAP) -> bool:
    activation = np.atleast_2d(x)
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = activation @ w + b
        if np.any(np.abs(z) < gap):
            return True
        activation = np.maximum(z, 0.0)
    return False


def check_parameter_gradients(name: str, spec: LossSpec, seed: int = 0, n: int = 20,
                              layer_dims=(5, 8, 4), grad_perturbation: float = 0.0) -> PropertyResult:
    """Backpropagated parameter gradients against central differences."""
    rng = np.random.default_rng(seed + 20)
    checked = passed = skipped = 0
    worst = 0.0
    while checked < n:
        model = init_mlp(layer_dims, int(rng.integers(0, 2**31)))
        # Scale weights up so logits spread past the MbLS margin
        model = type(model)(model.layer_dims, [w * 3.0 for w in model.weights], model.biases)
        x = rng.normal(0.0, 1.0, size=(1, layer_dims[0]))
        y = rng.integers(0, layer_dims[-1], size=1)
        logits = forward(model, x)
        if _hidden_near_zero(model, x) or near_kink(spec, logits, y)[0]:
            skipped += 1
            continue
        _, analytic = backward(model, x, y, spec)
        numeric = numeric_parameter_grads(model, x, y, spec)
        a = np.concatenate([g.ravel() for g in analytic]) + grad_perturbation
        num = np.concatenate([g.ravel() for g in numeric])
        error = float(relative_error(a, num))
        checked += 1
        passed += int(error <= GRAD_TOLERANCE)
        worst = max(worst, error)
    return PropertyResult(name=f"{name} parameter gradient", checked=checked, passed=passed,
                          skipped=skipped, worst=worst)


def run_suite(seed: int = 0, quick: bool = False, grad_perturbation: float = 0.0,
              progress: Optional[Callable[[str], None]] = None) -> List[PropertyResult]:
    """All checks with their default sample counts (a tenth of them with quick=True)."""
    scale = 10 if quick else 1
    checks = [
        lambda: check_logit_bound_sandwich(seed, n=100_000 // scale),
        lambda: check_ls_decomposition(seed, n=10_000 // scale),
        lambda: check_focal_bound(seed, n=10_000 // scale),
        lambda: check_entropy_identity(seed, n=10_000 // scale),
    ]
    for name, spec in GRADIENT_SPECS.items():
        checks.append(lambda name=name, spec=spec: check_logit_gradients(
            name, spec, seed, n=max(10, 100 // scale), grad_perturbation=grad_perturbation))
    for name, spec in GRADIENT_SPECS.items():
        checks.append(lambda name=name, spec=spec: check_parameter_gradients(
            name, spec, seed, n=max(5, 20 // scale), grad_perturbation=grad_perturbation))

    results = []
    for check in checks:
        result = check()
        logger.info("%s: %d/%d passed (worst %.3g)", result.name, result.passed, result.checked, result.worst)
        if progress is not None:
            progress(result.name)
        results.append(result)
    return results
