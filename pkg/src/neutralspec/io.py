"""JSON problem and realization files.

Complex numbers are two-element ``[re, im]`` arrays.  Floats are written
with Python's shortest round-trip representation, so reading a file back
reproduces every value bit for bit.

Problem file::

    {
      "n": 2,
      "mu": [[2, 0], [-3, 0]],
      "Z": [[z00, z01], [z10, z11]],          # column m is z_m
      "window": 6,
      "lambda": [[...], [...]],               # optional, n x (2*window+1)
      "d": [[[...], ...], ...],               # optional, n x (2*window+1) x n
      "finite_part": {"lambda": [...], "d": [[...]]},   # optional, d columns
      "options": {"solve_window": 24, "tol_root": 1e-6, "tol_vec": 1e-6,
                  "seed": 0, "repair_epsilon": 1e-3, "repair": true}
    }

Realization file: ``A_minus1`` (dense), ``A2`` and ``A3`` as term lists
(``constant``, ``linear``, ``exponential`` with an ``exponent``), plus
free-form ``diagnostics``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .charmatrix import MatrixFunctionRep, SystemRealization
from .errors import ConditioningError, DomainError, InputError
from .spectral import ReferenceSpectrum, SpectralTarget, biorthogonal_frame

DEFAULT_OPTIONS = {
    "solve_window": None,
    "tol_root": 1e-6,
    "tol_vec": 1e-6,
    "seed": 0,
    "repair_epsilon": 1e-3,
    "repair": True,
}


# -- complex encoding ---------------------------------------------------------

def encode_complex(z):
    z = complex(z)
    return [z.real, z.imag]


def encode_array(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return encode_complex(a)
    return [encode_array(x) for x in a]


def _decode_number(v, where):
    if isinstance(v, bool):
        raise InputError(where, "expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise InputError(where, f"expected [re, im], got {v!r}")


def decode_array(v, shape, where):
    """Decode nested ``[re, im]`` lists into a complex array of ``shape``."""
    if len(shape) == 0:
        return np.asarray(_decode_number(v, where))
    if not isinstance(v, list) or len(v) != shape[0]:
        got = len(v) if isinstance(v, list) else type(v).__name__
        raise InputError(where, f"expected a list of length {shape[0]}, got {got}")
    out = np.empty(shape, dtype=complex)
    for i, x in enumerate(v):
        out[i] = decode_array(x, shape[1:], f"{where}[{i}]")
    if not np.all(np.isfinite(out)):
        raise InputError(where, "non-finite entry")
    return out


def _require(doc, key, where=""):
    if not isinstance(doc, dict) or key not in doc:
        raise InputError(f"{where}{key}", "missing required field")
    return doc[key]


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError("<file>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def write_json(obj, path):
    text = json.dumps(obj, indent=1, allow_nan=False) + "\n"
    if path is None or path == "-":
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def _sanitize(obj):
    """Replace non-finite floats so diagnostics stay valid JSON."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        obj = obj.item()
    if isinstance(obj, complex):
        return _sanitize([obj.real, obj.imag])
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


# -- problems -----------------------------------------------------------------

@dataclass
class Problem:
    reference: ReferenceSpectrum
    frame: object
    target: SpectralTarget
    options: dict = field(default_factory=dict)


def problem_from_dict(doc):
    """Validate a decoded problem document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise InputError("<root>", "expected a JSON object")
    n = _require(doc, "n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError("n", f"expected a positive integer, got {n!r}")
    mu = decode_array(_require(doc, "mu"), (n,), "mu")
    Z = decode_array(_require(doc, "Z"), (n, n), "Z")
    N = _require(doc, "window")
    if not isinstance(N, int) or isinstance(N, bool) or N < 0:
        raise InputError("window", f"expected a non-negative integer, got {N!r}")
    size = 2 * N + 1
    lam = decode_array(doc["lambda"], (n, size), "lambda") if "lambda" in doc else None
    d = decode_array(doc["d"], (n, size, n), "d") if "d" in doc else None
    fp = None
    if doc.get("finite_part") is not None:
        fpd = doc["finite_part"]
        lam0_raw = _require(fpd, "lambda", "finite_part.")
        if not isinstance(lam0_raw, list):
            raise InputError("finite_part.lambda", "expected a list")
        J = len(lam0_raw)
        fp = (decode_array(lam0_raw, (J,), "finite_part.lambda"),
              decode_array(_require(fpd, "d", "finite_part."), (n, J), "finite_part.d"))
    opts = dict(DEFAULT_OPTIONS)
    raw = doc.get("options", {}) or {}
    if not isinstance(raw, dict):
        raise InputError("options", "expected an object")
    for key, val in raw.items():
        if key not in DEFAULT_OPTIONS:
            raise InputError(f"options.{key}", "unknown option")
        opts[key] = val
    try:
        reference = ReferenceSpectrum(mu)
    except DomainError as exc:
        raise InputError("mu", str(exc)) from exc
    try:
        frame = biorthogonal_frame(Z)
    except (ConditioningError, DomainError) as exc:
        raise InputError("Z", str(exc)) from exc
    try:
        target = SpectralTarget(reference, frame, N, lam=lam, d=d, finite_part=fp)
    except DomainError as exc:
        raise InputError("lambda/d", str(exc)) from exc
    return Problem(reference, frame, target, opts)


def read_problem(path):
    return problem_from_dict(_read_json(path))


def problem_to_dict(target, options=None):
    n, N = target.n, target.window
    doc = {
        "n": n,
        "mu": encode_array(target.reference.mu),
        "Z": encode_array(target.frame.Z),
        "window": N,
        "lambda": encode_array(target.lam),
        "d": encode_array(target.d),
    }
    if target.finite_part is not None:
        lam0, d0 = target.finite_part
        doc["finite_part"] = {"lambda": encode_array(lam0), "d": encode_array(d0)}
    if options:
        doc["options"] = {k: v for k, v in options.items() if k in DEFAULT_OPTIONS}
    return doc


# -- realizations -------------------------------------------------------------

def rep_to_terms(rep):
    terms = []
    if np.any(rep.constant):
        terms.append({"kind": "constant", "matrix": encode_array(rep.constant)})
    if np.any(rep.linear):
        terms.append({"kind": "linear", "matrix": encode_array(rep.linear)})
    for e, c in zip(rep.exponents, rep.coeffs):
        terms.append({"kind": "exponential", "exponent": encode_complex(e),
                      "matrix": encode_array(c)})
    return terms


def terms_to_rep(terms, n, where):
    if not isinstance(terms, list):
        raise InputError(where, "expected a list of terms")
    const = np.zeros((n, n), complex)
    lin = np.zeros((n, n), complex)
    exps, coeffs = [], []
    for i, t in enumerate(terms):
        loc = f"{where}[{i}]"
        kind = _require(t, "kind", loc + ".")
        M = decode_array(_require(t, "matrix", loc + "."), (n, n), loc + ".matrix")
        if kind == "constant":
            const = const + M
        elif kind == "linear":
            lin = lin + M
        elif kind == "exponential":
            exps.append(complex(decode_array(_require(t, "exponent", loc + "."), (),
                                             loc + ".exponent")))
            coeffs.append(M)
        else:
            raise InputError(loc + ".kind", f"unknown term kind {kind!r}")
    return MatrixFunctionRep(n, const, lin, exps, np.array(coeffs).reshape(-1, n, n))


def realization_to_dict(sys, diagnostics=None):
    doc = {
        "n": sys.n,
        "canonical": bool(sys.canonical),
        "A_minus1": encode_array(sys.A_minus1),
        "A2": rep_to_terms(sys.A2),
        "A3": rep_to_terms(sys.A3),
    }
    if diagnostics is not None:
        doc["diagnostics"] = _sanitize(diagnostics)
    return doc


def realization_from_dict(doc):
    if not isinstance(doc, dict):
        raise InputError("<root>", "expected a JSON object")
    n = _require(doc, "n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise InputError("n", f"expected a positive integer, got {n!r}")
    A = decode_array(_require(doc, "A_minus1"), (n, n), "A_minus1")
    A2 = terms_to_rep(doc.get("A2", []), n, "A2")
    A3 = terms_to_rep(doc.get("A3", []), n, "A3")
    try:
        return SystemRealization(A, A2, A3, canonical=bool(doc.get("canonical", False)))
    except DomainError as exc:
        raise InputError("A3", str(exc)) from exc


def read_realization(path):
    doc = _read_json(path)
    return realization_from_dict(doc), doc.get("diagnostics", {})


def write_realization(sys, path, diagnostics=None):
    return write_json(realization_to_dict(sys, diagnostics), path)


def write_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
