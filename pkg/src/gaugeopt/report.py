"""Machine-readable solve reports (schema ``gaugeopt/1``)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .gauge import nuclear_norm
from .instances import dumps, instance_to_dict
from .rpca import RpcaSolution
from .sdp import SdpSolution

SCHEMA = "gaugeopt/1"
TIMING_FIELDS = ("timings",)


def instance_digest(instance):
    """SHA-256 of the canonical envelope text, so equal data gives equal digests."""
    text = dumps(instance_to_dict(instance))
    return "sha256:" + hashlib.sha256(text.encode("ascii")).hexdigest()


@dataclass
class Report:
    kind: str
    instance_digest: str
    config: dict
    dual: dict
    primal: dict
    certificate: dict
    passed: bool
    timings: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, d):
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(**d)

    def dumps(self):
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        return cls.from_json(json.loads(text))

    def without_timings(self):
        """The report as a dict with wall-clock fields dropped, for reproducibility checks."""
        d = self.to_json()
        for k in TIMING_FIELDS:
            d.pop(k, None)
        return d


def _timings(t):
    return {k: float(v) for k, v in t.items()}


def rpca_report(sol: RpcaSolution, cfg):
    d = sol.dual
    primal = {
        "objective": nuclear_norm(sol.X) + sol.instance.gamma * float(np.abs(sol.Y).sum()),
        "nuclear_norm": nuclear_norm(sol.X),
        "l1_norm": float(np.abs(sol.Y).sum()),
        "trivial": sol.trivial,
        "rank": sol.primal.rank if sol.primal is not None else None,
    }
    if sol.primal is not None and sol.primal.tsub is not None:
        ts = sol.primal.tsub
        primal["tsub"] = {"iterations": ts.iterations, "residual": ts.residual, "status": ts.status}
    dual = {"objective": d.objective, "iterations": d.iterations, "evaluations": d.evaluations,
            "converged": d.converged, "message": d.message, "kernel_warning": d.kernel_warning,
            "rounds": int(sol.timings.get("rounds", 1))}
    cert = sol.certificate
    timings = {k: v for k, v in sol.timings.items() if k != "rounds"}
    return Report("rpca", instance_digest(sol.instance), cfg.to_json(), dual, primal,
                  cert.to_json(), bool(cert.passed), _timings(timings))


def sdp_report(sol: SdpSolution, cfg):
    d = sol.dual
    p = sol.primal
    primal = {"objective": sol.objective, "rank": p.rank, "residual": p.residual}
    if p.sdls is not None:
        primal["sdls"] = {"iterations": p.sdls.iterations, "pg_residual": p.sdls.pg_residual,
                          "converged": p.sdls.converged}
    dual = {"mu": d.mu, "iterations": d.iterations, "evaluations": d.evaluations,
            "converged": d.converged, "message": d.message,
            "rounds": int(sol.timings.get("rounds", 1))}
    cert = sol.certificate
    timings = {k: v for k, v in sol.timings.items() if k != "rounds"}
    return Report("sdp", instance_digest(sol.instance), cfg.to_json(), dual, primal,
                  cert.to_json(), bool(cert.passed), _timings(timings))
