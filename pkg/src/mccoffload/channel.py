"""Success probabilities over Rayleigh fading with selection diversity.

Closed forms for time-division (one codeword per slot) and superposition
coding (layers decoded in index order with successive interference
cancellation), the reliability threshold algebra used by the optimizer, and
Monte Carlo estimators that serve as an independent check of the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

__all__ = [
    "LinkParams",
    "ScLayerStack",
    "UnattainableTarget",
    "required_snr",
    "success_prob_td",
    "success_prob_sc",
    "reliability_threshold",
    "min_power_td",
    "min_powers_sc",
    "mc_estimate_td",
    "mc_estimate_sc",
]


class UnattainableTarget(ValueError):
    """A reliability target that no finite transmit power can meet."""


def _check_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class LinkParams:
    bits: float
    slot: float
    bw: float
    snr: float
    diversity: int = 1

    def __post_init__(self) -> None:
        if self.bits < 0:
            raise ValueError(f"bits must be >= 0, got {self.bits!r}")
        _check_positive("slot", self.slot)
        _check_positive("bw", self.bw)
        _check_positive("snr", self.snr)
        if int(self.diversity) != self.diversity or self.diversity < 1:
            raise ValueError(f"diversity must be an integer >= 1, got {self.diversity!r}")


@dataclass(frozen=True)
class ScLayerStack:
    """Superimposed layers sharing one slot; index 0 is decoded first."""

    powers: tuple[float, ...]
    bits: tuple[float, ...]
    slot: float
    bw: float
    snr: float
    diversity: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        object.__setattr__(self, "bits", tuple(float(b) for b in self.bits))
        if len(self.powers) != len(self.bits) or not self.powers:
            raise ValueError("powers and bits must be nonempty and of equal length")
        if any(p < 0 for p in self.powers):
            raise ValueError("layer powers must be >= 0")
        if any(b < 0 for b in self.bits):
            raise ValueError("layer bits must be >= 0")
        _check_positive("slot", self.slot)
        _check_positive("bw", self.bw)
        _check_positive("snr", self.snr)
        if int(self.diversity) != self.diversity or self.diversity < 1:
            raise ValueError(f"diversity must be an integer >= 1, got {self.diversity!r}")

    def __len__(self) -> int:
        return len(self.powers)

    def interference(self, layer: int) -> float:
        """Total power of the layers still undecoded when ``layer`` is decoded."""
        return float(sum(self.powers[layer + 1:]))


def required_snr(bits: float, slot: float, bw: float) -> float:
    """SNR needed to carry ``bits`` in ``slot`` seconds over ``bw`` Hz: 2^(b/(LW)) - 1."""
    _check_positive("slot", slot)
    _check_positive("bw", bw)
    rate = bits / (slot * bw)
    if rate * math.log(2.0) > 700.0:
        return math.inf
    return math.expm1(rate * math.log(2.0))


def _diversity_success(u: float, d: int) -> float:
    # 1 - (1 - exp(-u))^d, with u = required gain threshold
    if u <= 0.0:
        return 1.0
    if math.isinf(u):
        return 0.0
    q = -math.expm1(-u)
    if q <= 0.0:
        return 1.0
    return -math.expm1(d * math.log(q))


def success_prob_td(link: LinkParams, power: float) -> float:
    if power < 0:
        raise ValueError(f"power must be >= 0, got {power!r}")
    if link.bits == 0:
        return 1.0
    if power == 0:
        return 0.0
    x = required_snr(link.bits, link.slot, link.bw)
    return _diversity_success(x / (link.snr * power), link.diversity)


def success_prob_sc(stack: ScLayerStack, layer: int) -> float:
    """Probability that layer ``layer`` (0-based) is decoded.

    Layers above ``layer`` act as noise. If the interference alone keeps the
    SINR below the target for every channel gain, the result is 0.
    """
    if not 0 <= layer < len(stack):
        raise IndexError(f"layer {layer} out of range for {len(stack)} layers")
    bits = stack.bits[layer]
    if bits == 0:
        return 1.0
    x = required_snr(bits, stack.slot, stack.bw)
    denom = stack.snr * stack.powers[layer] - x * stack.snr * stack.interference(layer)
    if not denom > 0:
        return 0.0
    return _diversity_success(x / denom, stack.diversity)


def reliability_threshold(conditional_target: float, diversity: int) -> float:
    """Largest x/(gamma*P) for which the per-link probability reaches sqrt(target).

    Returns ``c = -ln(1 - (1 - sqrt(r))^(1/d))``.
    """
    r = conditional_target
    if r >= 1.0:
        raise UnattainableTarget(
            f"conditional target {r!r} is unattainable with finite power"
        )
    if not r > 0.0:
        raise ValueError(f"conditional target must lie in (0, 1), got {r!r}")
    if diversity < 1:
        raise ValueError(f"diversity must be >= 1, got {diversity!r}")
    miss = (1.0 - math.sqrt(r)) ** (1.0 / diversity)
    return -math.log1p(-miss)


def min_power_td(link: LinkParams, conditional_target: float) -> float:
    """Smallest power meeting the per-link target sqrt(r~) on a TD slot."""
    c = reliability_threshold(conditional_target, link.diversity)
    if link.bits == 0:
        return 0.0
    x = required_snr(link.bits, link.slot, link.bw)
    return x / (link.snr * c)


def min_powers_sc(
    bits: tuple[float, ...] | list[float],
    thresholds: tuple[float, ...] | list[float],
    slot: float,
    bw: float,
    snr: float,
    headroom: float = 1.0,
) -> list[float]:
    """Minimal layer powers for a superposition slot, solved from the top layer down.

    Layer i needs ``gamma*P_i >= x_i/c_i + x_i*gamma*sum_{j>i} P_j``. Each power is
    multiplied by ``headroom`` (>= 1) before it enters the interference of the
    layers below, which keeps every constraint strict when ``headroom > 1``.
    """
    powers = [0.0] * len(bits)
    above = 0.0
    for k in reversed(range(len(bits))):
        x = required_snr(bits[k], slot, bw)
        p = (x / (snr * thresholds[k]) + x * above) * headroom if bits[k] > 0 else 0.0
        powers[k] = p
        above += p
    return powers


def _selection_gain(rng: np.random.Generator, diversity: int, samples: int) -> np.ndarray:
    # rows are branches; row 0 alone equals the d=1 draw for the same seed
    branches = rng.standard_exponential((diversity, samples))
    return branches.max(axis=0)


def _binomial(successes: np.ndarray) -> tuple[float, float]:
    n = successes.size
    p = float(np.count_nonzero(successes)) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def mc_estimate_td(
    link: LinkParams, power: float, samples: int, seed: int = 0
) -> tuple[float, float]:
    """Fraction of fading draws for which ``L*W*log2(1 + G*gamma*P) >= bits``.

    Returns ``(estimate, standard_error)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    gain = _selection_gain(rng, link.diversity, samples)
    capacity = link.slot * link.bw * np.log2(1.0 + gain * link.snr * power)
    return _binomial(capacity >= link.bits)


def mc_estimate_sc(
    stack: ScLayerStack, layer: int, samples: int, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo decode probability of one layer, one gain draw shared by all layers."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not 0 <= layer < len(stack):
        raise IndexError(f"layer {layer} out of range for {len(stack)} layers")
    rng = np.random.default_rng(seed)
    gain = _selection_gain(rng, stack.diversity, samples)
    signal = gain * stack.snr * stack.powers[layer]
    noise = 1.0 + gain * stack.snr * stack.interference(layer)
    capacity = stack.slot * stack.bw * np.log2(1.0 + signal / noise)
    return _binomial(capacity >= stack.bits[layer])
