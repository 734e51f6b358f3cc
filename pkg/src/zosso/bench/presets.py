"""Hyperparameter presets for the sequential driver.

Each preset carries the schedule formulas as LaTeX strings (printed by
``print-preset``) together with the numbers they encode. All three share
``alpha1 = 1/2`` (the ``sqrt(k+1)`` in ``s1``) and ``alpha2 = 1/4``.
Settings the formulas do not fix (``epsilon``, estimator, budgets) are
harness defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

from zosso.sso import SubproblemSchedule

__all__ = ["PRESETS", "Preset", "get_preset", "preset_names"]


@dataclass(frozen=True)
class Preset:
    name: str
    label: str
    beta_tex: str
    s1_tex: str
    s2_tex: str
    M: int
    q: int
    beta0: float
    s1_00: float
    s2_00: float
    alpha1: float = 0.5
    alpha2: float = 0.25
    epsilon: float = 1e-3
    distribution: str = "gaussian"
    truncate: bool = False
    max_evals: int = 5000
    # search phase is enabled only when n <= search_max_n
    search_budget: int = 0
    search_max_n: int = 0

    def formulas(self) -> Dict[str, str]:
        return {
            "beta^i": self.beta_tex,
            "s_1^{i,k}": self.s1_tex,
            "s_2^{i,k}": self.s2_tex,
            "M": str(self.M),
            "q": str(self.q),
        }

    def schedule(self) -> SubproblemSchedule:
        return SubproblemSchedule(self.beta0, self.s1_00, self.s2_00, self.epsilon, self.alpha1, self.alpha2)

    def search_budget_for(self, n: int) -> int:
        return self.search_budget if n <= self.search_max_n else 0

    def render(self) -> List[str]:
        lines = [f"# {self.label}"]
        lines += [f"# {key} = {value}" for key, value in self.formulas().items()]
        return lines


PRESETS: Dict[str, Preset] = {
    "cifar10": Preset(
        name="cifar10",
        label="Cifar10",
        beta_tex=r"\frac{0.005}{(i+1)^2}",
        s1_tex=r"\frac{0.005}{(i+1)^{\frac{3}{2}}\sqrt{k+1}}",
        s2_tex=r"\frac{0.9}{(i+1) (k+1)^{\frac{1}{4}}}",
        M=60,
        q=10,
        beta0=0.005,
        s1_00=0.005,
        s2_00=0.9,
        epsilon=0.005 / 100,
        distribution="sphere",
    ),
    "imagenet": Preset(
        name="imagenet",
        label="ImageNet",
        beta_tex=r"\frac{0.001}{(i+1)^{2}}",
        s1_tex=r"\frac{0.003}{(i+1)^{\frac{3}{2}}\sqrt{k+1}}",
        s2_tex=r"\frac{0.7}{(i+1) (k+1)^{\frac{1}{4}}}",
        M=100,
        q=10,
        beta0=0.001,
        s1_00=0.003,
        s2_00=0.7,
        epsilon=0.001 / 100,
        distribution="sphere",
    ),
    "solar": Preset(
        name="solar",
        label="Solar",
        beta_tex=r"\frac{0.3}{(i+1)^2}",
        s1_tex=r"\frac{0.1}{(i+1)^{\frac{3}{2}}\sqrt{k+1}}",
        s2_tex=r"\frac{0.5}{(i+1) (k+1)^{\frac{1}{4}}}",
        M=5,
        q=10,
        beta0=0.3,
        s1_00=0.1,
        s2_00=0.5,
        epsilon=1e-3,
        truncate=True,
        max_evals=1000,
        search_budget=100,
        search_max_n=20,
    ),
}


def preset_names() -> List[str]:
    return sorted(PRESETS)


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; expected one of {preset_names()}") from None
