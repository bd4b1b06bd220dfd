"""Synthetic labeled trace datasets with planted delay combinations.

A scenario is a service topology plus a recipe for drawing planted issues:
each issue is a combination of 1-3 critical RPCs that receive a fixed
per-invocation delay, sized so the per-request total equals a chosen
fraction of the baseline mean latency.  Requests are assigned to an issue
with a small probability and labeled accordingly, giving ground truth for
the evaluation harness.  A configurable delay on one non-critical RPC
perturbs that RPC's column without ever touching latency.

Randomness is split over three independent streams (baseline probe, scenario
drawing, request generation) with a fixed draw order, so that changing the
non-critical delay fraction alters only the non-critical column, and a given
(config, seed) always reproduces the dataset byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .model import NO_LABEL, Dataset

_NOISE_CLIP_SIGMAS = 3.0
_MAX_FRACTION_REDRAWS = 10_000


@dataclass(frozen=True)
class RpcSpec:
    """One RPC of the topology and its per-invocation base-time distribution."""

    name: str
    invocations: int
    base_mean: float  # ms
    base_sigma: float  # ms
    family: str = "lognormal"  # or "normal" (truncated at 0)
    critical: bool = True

    def __post_init__(self) -> None:
        if self.invocations < 1:
            raise ConfigError(f"{self.name}: invocations must be >= 1")
        if self.base_mean <= 0 or self.base_sigma < 0:
            raise ConfigError(f"{self.name}: base_mean must be > 0 and base_sigma >= 0")
        if self.family not in ("lognormal", "normal"):
            raise ConfigError(f"{self.name}: unknown distribution family {self.family!r}")


@dataclass(frozen=True)
class AdcSpec:
    """A planted issue: per-invocation delays on a few critical RPCs."""

    label: str
    targets: tuple[tuple[str, float], ...]  # (rpc name, per-invocation delay ms)
    assignment_probability: float = 0.1

    def total_delay(self, topology: Sequence[RpcSpec]) -> float:
        by_name = {spec.name: spec for spec in topology}
        return sum(by_name[name].invocations * d for name, d in self.targets)

    def validate_against(self, topology: Sequence[RpcSpec], expected_total: float) -> None:
        by_name = {spec.name: spec for spec in topology}
        if not 1 <= len(self.targets) <= 3:
            raise ConfigError(f"{self.label}: issues target 1 to 3 RPCs")
        for name, _ in self.targets:
            if name not in by_name:
                raise ConfigError(f"{self.label}: unknown RPC {name!r}")
            if not by_name[name].critical:
                raise ConfigError(f"{self.label}: target {name!r} is not critical")
        if abs(self.total_delay(topology) - expected_total) > 1e-6:
            raise ConfigError(f"{self.label}: per-invocation delays do not sum to the total")


@dataclass(frozen=True)
class ScenarioConfig:
    topology: tuple[RpcSpec, ...]
    n_requests: int
    adc_count: int = 2
    delay_fraction_range: tuple[float, float] = (0.2, 0.4)
    delay_fractions: Optional[tuple[float, ...]] = None  # fixed per-issue
    min_distance_fraction: float = 0.0
    adc_probability: float = 0.1
    noncritical_delay_fraction: float = 0.0
    noncritical_probability: float = 0.5
    baseline_probe: int = 2000
    noise_fraction: float = 0.02
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not any(spec.critical for spec in self.topology):
            raise ConfigError("topology: needs at least one critical RPC")
        names = [spec.name for spec in self.topology]
        if len(set(names)) != len(names):
            raise ConfigError("topology: duplicate RPC names")
        if self.n_requests < 1:
            raise ConfigError("n_requests: must be >= 1")
        if self.adc_count < 1:
            raise ConfigError("adc_count: must be >= 1")
        if self.adc_count * self.adc_probability > 1 + 1e-12:
            raise ConfigError("adc_probability: assignment probabilities exceed 1")
        lo, hi = self.delay_fraction_range
        if not 0 < lo <= hi:
            raise ConfigError("delay_fraction_range: need 0 < low <= high")
        if self.delay_fractions is not None and len(self.delay_fractions) != self.adc_count:
            raise ConfigError("delay_fractions: length must equal adc_count")
        if self.baseline_probe < 100:
            raise ConfigError("baseline_probe: must be >= 100")
        if self.noncritical_delay_fraction < 0 or self.noise_fraction < 0:
            raise ConfigError("fractions must be non-negative")
        if self.noncritical_delay_fraction > 0 and not any(
            not spec.critical for spec in self.topology
        ):
            raise ConfigError(
                "noncritical_delay_fraction: topology has no non-critical RPC"
            )


def _sample_invocation_times(
    rng: np.random.Generator, spec: RpcSpec, n: int
) -> np.ndarray:
    """Cumulative execution time: the sum of one sample per invocation."""
    shape = (spec.invocations, n)
    if spec.base_sigma == 0:
        return np.full(n, spec.base_mean * spec.invocations, dtype=np.float64)
    if spec.family == "lognormal":
        cv2 = (spec.base_sigma / spec.base_mean) ** 2
        sigma = math.sqrt(math.log1p(cv2))
        mu = math.log(spec.base_mean) - sigma * sigma / 2
        draws = rng.lognormal(mu, sigma, shape)
    else:  # normal truncated at 0 by resampling
        draws = rng.normal(spec.base_mean, spec.base_sigma, shape)
        while True:
            bad = draws < 0
            if not bad.any():
                break
            draws[bad] = rng.normal(spec.base_mean, spec.base_sigma, int(bad.sum()))
    return draws.sum(axis=0)


def _truncated_standard_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(0.0, 1.0, n)
    while True:
        bad = np.abs(z) > _NOISE_CLIP_SIGMAS
        if not bad.any():
            break
        z[bad] = rng.normal(0.0, 1.0, int(bad.sum()))
    return z


def _streams(config: ScenarioConfig) -> tuple[np.random.Generator, ...]:
    base = np.random.SeedSequence(config.rng_seed)
    return tuple(np.random.default_rng(child) for child in base.spawn(3))


def _baseline_stats(
    config: ScenarioConfig, rng: np.random.Generator
) -> tuple[float, float]:
    """(mean baseline latency, latency noise sigma) from unaltered requests."""
    raw = np.zeros(config.baseline_probe, dtype=np.float64)
    for spec in config.topology:
        if spec.critical:
            raw += _sample_invocation_times(rng, spec, config.baseline_probe)
    sigma = config.noise_fraction * float(raw.mean())
    noise = sigma * _truncated_standard_normal(rng, config.baseline_probe)
    return float((raw + noise).mean()), sigma


def estimate_baseline_latency(config: ScenarioConfig) -> float:
    """Mean request latency of the topology without any planted issue."""
    probe_rng, _, _ = _streams(config)
    return _baseline_stats(config, probe_rng)[0]


def _draw_fractions(config: ScenarioConfig, rng: np.random.Generator) -> list[float]:
    if config.delay_fractions is not None:
        return [float(f) for f in config.delay_fractions]
    lo, hi = config.delay_fraction_range
    for _ in range(_MAX_FRACTION_REDRAWS):
        fractions = [float(rng.uniform(lo, hi)) for _ in range(config.adc_count)]
        gaps = [
            abs(a - b) for i, a in enumerate(fractions) for b in fractions[i + 1 :]
        ]
        if not gaps or min(gaps) >= config.min_distance_fraction:
            return fractions
    raise ConfigError(
        "min_distance_fraction: could not draw sufficiently separated delays"
    )


def _draw_adcs(
    config: ScenarioConfig, l_mu: float, rng: np.random.Generator
) -> list[AdcSpec]:
    """Random issues: disjoint critical targets while the pool allows it.

    Issues targeting identical RPC sets with identical delays would be
    indistinguishable by construction, so each issue prefers RPCs not used
    by an earlier one.
    """
    critical = [spec for spec in config.topology if spec.critical]
    fractions = _draw_fractions(config, rng)
    used: set[str] = set()
    adcs = []
    for i, fraction in enumerate(fractions):
        pool = [spec for spec in critical if spec.name not in used] or critical
        count = int(rng.integers(1, min(3, len(pool)) + 1))
        chosen_idx = sorted(rng.choice(len(pool), size=count, replace=False).tolist())
        chosen = [pool[k] for k in chosen_idx]
        total = fraction * l_mu
        share = total / count
        targets = tuple((spec.name, share / spec.invocations) for spec in chosen)
        used.update(spec.name for spec in chosen)
        adcs.append(
            AdcSpec(
                label=f"A{i + 1}",
                targets=targets,
                assignment_probability=config.adc_probability,
            )
        )
    return adcs


def generate(config: ScenarioConfig) -> tuple[Dataset, dict]:
    """Generate the labeled dataset and its manifest.

    Draw order within the request stream is fixed (base times in topology
    order, then issue assignment, then the non-critical coin, then latency
    noise) and independent of every delay value, so scenarios that differ
    only in injected delays share all their underlying samples.
    """
    probe_rng, scenario_rng, request_rng = _streams(config)
    l_mu, noise_sigma = _baseline_stats(config, probe_rng)
    adcs = _draw_adcs(config, l_mu, scenario_rng)

    noncritical = [spec for spec in config.topology if not spec.critical]
    nc_spec: Optional[RpcSpec] = None
    if noncritical:
        # chosen whenever a candidate exists, keeping the stream layout
        # identical across different delay fractions
        nc_spec = noncritical[int(scenario_rng.integers(len(noncritical)))]
    nc_delay = config.noncritical_delay_fraction * l_mu

    n = config.n_requests
    columns = {}
    latencies = np.zeros(n, dtype=np.float64)
    for spec in config.topology:
        columns[spec.name] = _sample_invocation_times(request_rng, spec, n)
        if spec.critical:
            latencies += columns[spec.name]

    u = request_rng.random(n)
    assignment = np.full(n, -1, dtype=np.intp)
    in_adc = u < config.adc_probability * len(adcs)
    assignment[in_adc] = np.minimum(
        (u[in_adc] / config.adc_probability).astype(np.intp), len(adcs) - 1
    )

    coin = None
    if nc_spec is not None:
        coin = request_rng.random(n) < config.noncritical_probability
    noise = noise_sigma * _truncated_standard_normal(request_rng, n)

    by_name = {spec.name: spec for spec in config.topology}
    for i, adc in enumerate(adcs):
        mask = assignment == i
        total = 0.0
        for name, d in adc.targets:
            columns[name][mask] += by_name[name].invocations * d
            total += by_name[name].invocations * d
        latencies[mask] += total
    if nc_spec is not None and nc_delay > 0:
        columns[nc_spec.name][coin] += nc_delay
    latencies += noise
    np.maximum(latencies, 0.0, out=latencies)

    labels = tuple(
        adcs[a].label if a >= 0 else NO_LABEL for a in assignment.tolist()
    )
    labeled_latencies = latencies[assignment >= 0]
    slo = (
        float(np.nextafter(labeled_latencies.min(), -np.inf))
        if len(labeled_latencies)
        else math.inf
    )

    schema = tuple(spec.name for spec in config.topology)
    dataset = Dataset(
        schema=schema,
        exec_times=np.column_stack([columns[name] for name in schema]),
        latencies=latencies,
        slo=slo,
        labels=labels,
    )
    manifest = {
        "l_mu": l_mu,
        "noise_sigma": noise_sigma,
        "slo": None if math.isinf(slo) else slo,
        "seed": config.rng_seed,
        "n_requests": n,
        "adcs": [
            {
                "label": adc.label,
                "total_delay_ms": adc.total_delay(config.topology),
                "delay_fraction": adc.total_delay(config.topology) / l_mu,
                "assignment_probability": adc.assignment_probability,
                "targets": [
                    {
                        "rpc": name,
                        "per_invocation_ms": d,
                        "invocations": by_name[name].invocations,
                    }
                    for name, d in adc.targets
                ],
            }
            for adc in adcs
        ],
        "noncritical": (
            {
                "rpc": nc_spec.name,
                "delay_ms": nc_delay,
                "probability": config.noncritical_probability,
            }
            if nc_spec is not None
            else None
        ),
        "config": config_to_dict(config),
    }
    return dataset, manifest


# ---------------------------------------------------------------------------
# Shipped topologies.  Shapes (unique RPCs, invocation counts, critical-path
# sizes) mirror two well-known open-source microservice benchmarks; the
# base-time parameters themselves are invented.
# ---------------------------------------------------------------------------

ESHOPPER_LIKE: tuple[RpcSpec, ...] = (
    RpcSpec("catalog⋄getProducts", 6, 22.0, 2.6),
    RpcSpec("catalog⋄getCategories", 4, 18.0, 2.2),
    RpcSpec("cart⋄getCart", 2, 25.0, 3.2),
    RpcSpec("auth⋄check", 5, 14.0, 1.7),
    RpcSpec("profile⋄getProfile", 3, 23.0, 2.8),
    RpcSpec("media⋄getThumbnails", 3, 30.0, 4.5, critical=False),
    RpcSpec("recommender⋄getSuggestions", 2, 45.0, 6.0, critical=False),
)

TRAINTICKET_LIKE: tuple[RpcSpec, ...] = (
    RpcSpec("travel⋄query", 6, 2.4, 0.30),
    RpcSpec("ticketinfo⋄query", 6, 2.0, 0.24),
    RpcSpec("order⋄status", 5, 1.8, 0.22),
    RpcSpec("route⋄get", 4, 2.2, 0.28),
    RpcSpec("train⋄retrieve", 4, 1.6, 0.20),
    RpcSpec("station⋄byName", 4, 1.5, 0.18),
    RpcSpec("seat⋄availability", 3, 3.0, 0.40),
    RpcSpec("price⋄query", 3, 2.6, 0.32),
    RpcSpec("config⋄get", 3, 1.4, 0.18),
    RpcSpec("basic⋄getAll", 2, 5.5, 0.70),
    RpcSpec("security⋄check", 2, 4.0, 0.50),
    RpcSpec("contacts⋄byAccount", 2, 3.5, 0.45),
    RpcSpec("food⋄list", 2, 6.2, 0.80),
    RpcSpec("notification⋄send", 2, 8.0, 1.10, critical=False),
)

TOPOLOGIES = {"eshopper": ESHOPPER_LIKE, "trainticket": TRAINTICKET_LIKE}


# ---------------------------------------------------------------------------
# JSON config round trip (used by the generate command).
# ---------------------------------------------------------------------------


def config_to_dict(config: ScenarioConfig) -> dict:
    return {
        "topology": [
            {
                "name": spec.name,
                "invocations": spec.invocations,
                "base_mean": spec.base_mean,
                "base_sigma": spec.base_sigma,
                "family": spec.family,
                "critical": spec.critical,
            }
            for spec in config.topology
        ],
        "n_requests": config.n_requests,
        "adc_count": config.adc_count,
        "delay_fraction_range": list(config.delay_fraction_range),
        "delay_fractions": (
            list(config.delay_fractions) if config.delay_fractions is not None else None
        ),
        "min_distance_fraction": config.min_distance_fraction,
        "adc_probability": config.adc_probability,
        "noncritical_delay_fraction": config.noncritical_delay_fraction,
        "noncritical_probability": config.noncritical_probability,
        "baseline_probe": config.baseline_probe,
        "noise_fraction": config.noise_fraction,
        "rng_seed": config.rng_seed,
    }


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a config from its JSON form; errors carry field paths."""

    def fetch(key, default=None, required=False):
        if required and key not in data:
            raise ConfigError(f"{key}: required field missing")
        return data.get(key, default)

    topology_raw = fetch("topology", required=True)
    if isinstance(topology_raw, str):
        if topology_raw not in TOPOLOGIES:
            raise ConfigError(
                f"topology: unknown name {topology_raw!r}; "
                f"known: {sorted(TOPOLOGIES)}"
            )
        topology = TOPOLOGIES[topology_raw]
    else:
        topology = []
        for i, item in enumerate(topology_raw):
            try:
                topology.append(
                    RpcSpec(
                        name=str(item["name"]),
                        invocations=int(item["invocations"]),
                        base_mean=float(item["base_mean"]),
                        base_sigma=float(item["base_sigma"]),
                        family=str(item.get("family", "lognormal")),
                        critical=bool(item.get("critical", True)),
                    )
                )
            except KeyError as exc:
                raise ConfigError(f"topology[{i}].{exc.args[0]}: required") from None
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"topology[{i}]: {exc}") from None
        topology = tuple(topology)

    fractions = fetch("delay_fractions")
    rng_range = fetch("delay_fraction_range", [0.2, 0.4])
    try:
        return ScenarioConfig(
            topology=tuple(topology),
            n_requests=int(fetch("n_requests", required=True)),
            adc_count=int(fetch("adc_count", 2)),
            delay_fraction_range=(float(rng_range[0]), float(rng_range[1])),
            delay_fractions=(
                tuple(float(f) for f in fractions) if fractions is not None else None
            ),
            min_distance_fraction=float(fetch("min_distance_fraction", 0.0)),
            adc_probability=float(fetch("adc_probability", 0.1)),
            noncritical_delay_fraction=float(fetch("noncritical_delay_fraction", 0.0)),
            noncritical_probability=float(fetch("noncritical_probability", 0.5)),
            baseline_probe=int(fetch("baseline_probe", 2000)),
            noise_fraction=float(fetch("noise_fraction", 0.02)),
            rng_seed=int(fetch("rng_seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(config, rng_seed=seed)
