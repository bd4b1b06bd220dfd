"""Selecting the final pattern set from the archive by an F-beta sweep.

Beta runs from 0.1 (precision weighted ten times recall) to 1.0 in 0.01
steps; the archive member with the best F-beta score at each step joins a
candidate pool, and the pool member with the smallest latency dissimilarity
wins.  The sweep trades recall for precision whenever that buys tighter
latency clusters, which is the behaviour wanted for issue diagnosis.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, NoSolutionError
from .model import PatternSet
from .nsga import ParetoArchive


@dataclass(frozen=True)
class DecisionConfig:
    beta_start: float = 0.1
    beta_step: float = 0.01
    beta_end: float = 1.0  # inclusive

    def __post_init__(self) -> None:
        if not 0 < self.beta_start <= self.beta_end:
            raise ConfigError("need 0 < beta_start <= beta_end")
        if self.beta_step <= 0:
            raise ConfigError("beta_step must be positive")


def beta_sweep(config: DecisionConfig = DecisionConfig()) -> list[float]:
    """Sweep values via integer stepping, immune to 0.1 + 0.01 float drift."""
    steps = int(round((config.beta_end - config.beta_start) / config.beta_step))
    return [round(config.beta_start + i * config.beta_step, 12) for i in range(steps + 1)]


def f_beta(precision: float, recall: float, beta: float) -> float:
    denom = beta * beta * precision + recall
    if denom == 0:
        return 0.0
    return (1 + beta * beta) * precision * recall / denom


def decide(archive: ParetoArchive, config: DecisionConfig = DecisionConfig()) -> PatternSet:
    """The archive member chosen by the full sweep; deterministic under ties.

    Ties (both at each beta's argmax and at the final argmin) break by lower
    dissimilarity, then fewer patterns, then canonical genome order.
    """
    if len(archive) == 0:
        raise NoSolutionError("empty archive: the search produced no solutions")

    candidates: dict[PatternSet, tuple] = {}
    for beta in beta_sweep(config):
        best = min(
            archive.members,
            key=lambda member: (
                -f_beta(member[1].precision, member[1].recall, beta),
                member[1].dissimilarity,
                member[0].size,
                member[0].sort_key(),
            ),
        )
        candidates.setdefault(best[0], best)

    winner = min(
        candidates.values(),
        key=lambda member: (
            member[1].dissimilarity,
            member[0].size,
            member[0].sort_key(),
        ),
    )
    return winner[0]
