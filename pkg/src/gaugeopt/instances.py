"""Instance and solution files: a JSON envelope around Matrix Market matrices.

An envelope looks like::

    {"kind": "rpca", "gamma": 0.5,
     "matrices": {"M": "%%MatrixMarket matrix array real general\\n..."}}

Each entry of ``matrices`` is either inline Matrix Market text or a path
relative to the envelope file.  RPCA instances carry ``M``; SDP instances
carry ``C`` and ``A1`` ... ``Am`` plus the vector ``b``.  Solution files use
the kinds ``rpca-primal`` (``X``, ``Y``), ``rpca-dual`` (``Z``),
``sdp-primal`` (``X``) and ``sdp-dual`` (vector ``y``).

Writing uses 17 significant digits, so values survive a round trip exactly.
"""

from __future__ import annotations

import io
import json
import re
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .errors import InvalidInput, ParseError
from .rpca import RpcaInstance
from .sdp import SdpInstance

INSTANCE_KINDS = ("rpca", "sdp")
SOLUTION_KINDS = ("rpca-primal", "rpca-dual", "sdp-primal", "sdp-dual")

_LINE = re.compile(r"[Ll]ine (\d+)")


def matrix_to_mm(A, symmetric=False):
    """Matrix Market array text for a dense real matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidInput("only 2-D matrices can be written")
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, A, symmetry="symmetric" if symmetric else "general", precision=17)
    return buf.getvalue().decode("ascii")


def mm_to_matrix(text, name="matrix"):
    """Dense float array from Matrix Market text (array or coordinate, real or integer)."""
    try:
        A = scipy.io.mmread(io.StringIO(text))
    except (ValueError, OSError, TypeError) as exc:
        m = _LINE.search(str(exc))
        raise ParseError(f"bad Matrix Market data: {exc}", field=name,
                         line=int(m.group(1)) if m else None) from None
    if scipy.sparse.issparse(A):
        A = A.toarray()
    A = np.asarray(A)
    if np.iscomplexobj(A):
        raise ParseError("complex matrices are not supported", field=name)
    A = A.astype(float)
    if not np.all(np.isfinite(A)):
        raise ParseError("matrix has non-finite entries", field=name)
    return A


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return doc


def _matrix(doc, name, base):
    mats = doc.get("matrices")
    if not isinstance(mats, dict):
        raise ParseError("missing 'matrices' object", field="matrices")
    if name not in mats:
        raise ParseError(f"missing matrix {name!r}", field=f"matrices.{name}")
    entry = mats[name]
    if not isinstance(entry, str):
        raise ParseError("matrix entries must be Matrix Market text or a path",
                         field=f"matrices.{name}")
    if not entry.lstrip().startswith("%%MatrixMarket"):
        target = base / entry
        try:
            entry = target.read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {target}: {exc.strerror or exc}",
                             field=f"matrices.{name}") from None
    return mm_to_matrix(entry, f"matrices.{name}")


def _scalar(doc, key):
    if key not in doc:
        raise ParseError(f"missing {key!r}", field=key)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{key!r} must be a number", field=key)
    return float(v)


def _vector(doc, key):
    if key not in doc:
        raise ParseError(f"missing {key!r}", field=key)
    v = doc[key]
    if not isinstance(v, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ParseError(f"{key!r} must be a list of numbers", field=key)
    return np.array(v, dtype=float)


def _kind(doc, allowed):
    kind = doc.get("kind")
    if kind not in allowed:
        raise ParseError(f"'kind' must be one of {', '.join(allowed)}; got {kind!r}", field="kind")
    return kind


def instance_from_dict(doc, base="."):
    base = Path(base)
    kind = _kind(doc, INSTANCE_KINDS)
    if kind == "rpca":
        return RpcaInstance(_matrix(doc, "M", base), _scalar(doc, "gamma"))
    b = _vector(doc, "b")
    if b.size == 0:
        raise ParseError("b must be nonempty", field="b")
    C = _matrix(doc, "C", base)
    A = [_matrix(doc, f"A{i + 1}", base) for i in range(b.size)]
    extra = [k for k in doc["matrices"] if re.fullmatch(r"A\d+", k) and int(k[1:]) > b.size]
    if extra:
        raise ParseError(f"{len(A) + len(extra)} constraint matrices but b has length {b.size}",
                         field="b")
    offset = _scalar(doc, "offset") if "offset" in doc else 0.0
    return SdpInstance(C, b, A, offset)


def load_instance(path):
    """Parse an instance envelope into an :class:`RpcaInstance` or :class:`SdpInstance`.

    Raises
    ------
    ParseError
        Missing or malformed fields, with the field and line when known.
    InvalidInput
        Data that parses but breaks an instance invariant, for example an
        asymmetric ``A3``.
    """
    path = Path(path)
    return instance_from_dict(_read_json(path), path.parent)


def instance_to_dict(instance):
    if isinstance(instance, RpcaInstance):
        return {"kind": "rpca", "gamma": instance.gamma,
                "matrices": {"M": matrix_to_mm(instance.M)}}
    if isinstance(instance, SdpInstance):
        mats = {"C": matrix_to_mm(instance.C, symmetric=True)}
        for i, Ai in enumerate(instance.A):
            mats[f"A{i + 1}"] = matrix_to_mm(Ai, symmetric=True)
        doc = {"kind": "sdp", "b": [float(v) for v in instance.b], "matrices": mats}
        if instance.offset:
            doc["offset"] = instance.offset
        return doc
    raise InvalidInput(f"not an instance: {type(instance).__name__}")


def dumps(doc):
    """Canonical JSON text: sorted keys, fixed layout, trailing newline."""
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_instance(instance, path):
    Path(path).write_text(dumps(instance_to_dict(instance)))


def solution_to_dict(kind, **parts):
    """Envelope for a solution file; matrices go in ``matrices``, ``y`` stays a list."""
    if kind not in SOLUTION_KINDS:
        raise InvalidInput(f"unknown solution kind {kind!r}")
    doc = {"kind": kind, "matrices": {}}
    for name, value in parts.items():
        if name == "y":
            doc["y"] = [float(v) for v in np.asarray(value, dtype=float).ravel()]
        else:
            doc["matrices"][name] = matrix_to_mm(value, symmetric=kind == "sdp-primal")
    return doc


def save_solution(path, kind, **parts):
    Path(path).write_text(dumps(solution_to_dict(kind, **parts)))


def load_solution(path, kind):
    """Read a solution file of the given kind; returns a dict of arrays."""
    path = Path(path)
    doc = _read_json(path)
    _kind(doc, (kind,))
    if kind == "rpca-primal":
        return {"X": _matrix(doc, "X", path.parent), "Y": _matrix(doc, "Y", path.parent)}
    if kind == "rpca-dual":
        return {"Z": _matrix(doc, "Z", path.parent)}
    if kind == "sdp-primal":
        return {"X": _matrix(doc, "X", path.parent)}
    return {"y": _vector(doc, "y")}
