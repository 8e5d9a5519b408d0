"""Solver configuration shared by the RPCA and SDP pipelines."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidInput

STEP_RULES = ("sqrt", "polyak", "dilation")


@dataclass(frozen=True)
class SolverConfig:
    """Every knob of a solve; reports embed the full config for replay.

    ``step_rule`` picks the dual method: ``"sqrt"`` (diminishing steps
    ``alpha0 / sqrt(k + 1)``), ``"polyak"`` (needs ``polyak_target``), or
    ``"dilation"`` (subgradient steps in a metric dilated along successive
    subgradient differences; the default, and the only rule accurate enough
    for primal recovery at desk-scale budgets).  ``patience`` only affects
    ``"dilation"``: the number of metric restarts in a row without a relative
    improvement of ``rel_tol`` before the run stops.  ``refine_rounds`` is
    how many times a full solve warm-restarts the dual from its best point
    when the certificate of the recovered primal fails.
    """

    max_iter: int = 20000
    rel_tol: float = 1e-12
    window: int = 400
    patience: int = 4
    step_rule: str = "dilation"
    polyak_target: Optional[float] = None
    dilation: float = 2.0
    tau_mult: float = 1e-4
    tau_null: float = 1e-6
    admm_beta: float = 1.0
    admm_tol: float = 1e-8
    admm_max_iter: int = 20000
    sdls_tol: float = 1e-8
    sdls_max_iter: int = 50000
    cond6_tol: float = 1e-3
    kernel_tol: float = 1e-13
    cert_tol: float = 1e-4
    duality_tol: float = 1e-3
    refine_rounds: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.step_rule not in STEP_RULES:
            raise InvalidInput(f"unknown step rule {self.step_rule!r}")
        if self.step_rule == "polyak" and self.polyak_target is None:
            raise InvalidInput("the polyak step rule needs a target value")
        if (self.max_iter < 1 or self.window < 1 or self.patience < 1
                or self.admm_max_iter < 1 or self.sdls_max_iter < 1):
            raise InvalidInput("iteration counts must be >= 1")
        if self.refine_rounds < 0:
            raise InvalidInput("refine_rounds must be >= 0")
        for name in ("rel_tol", "tau_mult", "tau_null", "admm_beta", "admm_tol", "sdls_tol",
                     "cond6_tol", "kernel_tol", "cert_tol", "duality_tol"):
            if not getattr(self, name) > 0:
                raise InvalidInput(f"{name} must be positive")
        if not self.dilation > 1:
            raise InvalidInput("dilation coefficient must exceed 1")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_json(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d):
        return cls(**d)


def parse_step(text):
    """Parse a ``--step`` value: ``sqrt``, ``dilation`` or ``polyak:TARGET``."""
    if text.startswith("polyak:"):
        try:
            target = float(text.split(":", 1)[1])
        except ValueError:
            raise InvalidInput(f"bad polyak target in {text!r}") from None
        return {"step_rule": "polyak", "polyak_target": target}
    if text in ("sqrt", "dilation"):
        return {"step_rule": text, "polyak_target": None}
    raise InvalidInput(f"unknown step rule {text!r}")
