"""JSON encodings for every value type crossing the CLI boundary.

Numbers never pass through locale formatting: exact scalars are rational
strings ("3/2"), floating complex entries are [re, im] pairs serialized
by repr, and every report is dumped with sorted keys so identical inputs
produce byte-identical files.
"""

import json
from fractions import Fraction

import numpy as np

from .combinat import MarkedLine, NilpotentClass, ParabolicType
from .dsolve import DSInstance, DSSolution
from .higgs import HiggsTuple
from .spectral import HitchinPoint
from .starrep import StarQuiver, StarRep


class InputFormatError(ValueError):
    pass


def frac_str(x: Fraction) -> str:
    return str(x)


def parse_frac(s) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise InputFormatError(f"not an exact rational: {s!r}") from e


def scalar_to_json(x, mode):
    if mode == "exact":
        return frac_str(x)
    xc = complex(x)
    return [xc.real, xc.imag]


def scalar_from_json(v, mode):
    if mode == "exact":
        return parse_frac(v)
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2:
        return complex(v[0], v[1])
    raise InputFormatError(f"not a floating scalar: {v!r}")


def matrix_to_json(m, mode):
    if mode == "exact":
        return [[frac_str(x) for x in row] for row in m]
    arr = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in arr]


def matrix_from_json(rows, mode, shape=None):
    if not isinstance(rows, list) or (rows and not isinstance(rows[0], list)):
        raise InputFormatError("matrix must be a list of rows")
    if mode == "exact":
        out = [[parse_frac(x) for x in row] for row in rows]
        return out
    out = np.array(
        [[scalar_from_json(x, "float") for x in row] for row in rows], dtype=complex
    )
    if shape is not None and out.shape != shape:
        raise InputFormatError(f"matrix has shape {out.shape}, expected {shape}")
    return out


# ---------------------------------------------------------------------------
# parabolic types and classes


def type_to_json(sigma: ParabolicType) -> dict:
    return {
        "points": [frac_str(p) for p in sigma.line.points],
        "rank": sigma.rank,
        "K": sigma.K,
        "flags": [
            {"multiplicities": list(m), "weights": list(w)}
            for m, w in zip(sigma.multiplicities, sigma.weights)
        ],
    }


def type_from_json(data) -> ParabolicType:
    try:
        points = tuple(parse_frac(p) for p in data["points"])
        flags = data["flags"]
        mults = tuple(tuple(int(x) for x in f["multiplicities"]) for f in flags)
        weights = tuple(tuple(int(x) for x in f["weights"]) for f in flags)
        line = MarkedLine(points, allow_small=len(points) < 4)
        return ParabolicType(
            line=line,
            rank=int(data["rank"]),
            K=int(data["K"]),
            multiplicities=mults,
            weights=weights,
        )
    except KeyError as e:
        raise InputFormatError(f"parabolic type is missing the field {e}") from e
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"invalid parabolic type: {e}") from e


def class_to_json(c: NilpotentClass) -> dict:
    return {
        "rank": c.rank,
        "rank_sequence": list(c.rank_sequence),
        "partition": list(c.to_partition()) if c.rank_sequence else [1] * c.rank,
    }


def class_from_json(data) -> NilpotentClass:
    try:
        if "rank_sequence" in data:
            return NilpotentClass(
                rank=int(data["rank"]),
                rank_sequence=tuple(int(x) for x in data["rank_sequence"]),
            )
        return NilpotentClass.from_partition(
            data["partition"], rank=int(data["rank"])
        )
    except KeyError as e:
        raise InputFormatError(f"nilpotent class is missing the field {e}") from e
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"invalid nilpotent class: {e}") from e


def instance_to_json(inst: DSInstance) -> dict:
    return {
        "rank": inst.rank,
        "classes": [class_to_json(c) for c in inst.classes],
        "points": [frac_str(p) for p in inst.points],
    }


def instance_from_json(data) -> DSInstance:
    try:
        classes = tuple(class_from_json(c) for c in data["classes"])
        points = None
        if "points" in data and data["points"] is not None:
            points = tuple(parse_frac(p) for p in data["points"])
        return DSInstance(rank=int(data["rank"]), classes=classes, points=points)
    except KeyError as e:
        raise InputFormatError(f"instance is missing the field {e}") from e
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"invalid instance: {e}") from e


# ---------------------------------------------------------------------------
# representations


def rep_to_json(rep: StarRep) -> dict:
    mats = {}
    for j in range(rep.quiver.n_arms):
        for i in range(len(rep.f[j])):
            mats[f"f/{j + 1}/{i + 1}"] = matrix_to_json(rep.f[j][i], rep.mode)
            mats[f"g/{j + 1}/{i + 1}"] = matrix_to_json(rep.g[j][i], rep.mode)
    return {
        "rank": rep.quiver.rank,
        "arms": [list(a) for a in rep.quiver.arms],
        "mode": rep.mode,
        "matrices": mats,
    }


def rep_from_json(data) -> StarRep:
    try:
        quiver = StarQuiver(
            rank=int(data["rank"]), arms=tuple(tuple(a) for a in data["arms"])
        )
        mode = data.get("mode", "float")
        f, g = [], []
        for j in range(quiver.n_arms):
            dims = quiver.dims(j)
            fj, gj = [], []
            for i in range(len(dims) - 1):
                fj.append(
                    matrix_from_json(data["matrices"][f"f/{j + 1}/{i + 1}"], mode)
                )
                gj.append(
                    matrix_from_json(data["matrices"][f"g/{j + 1}/{i + 1}"], mode)
                )
            f.append(fj)
            g.append(gj)
        return StarRep(quiver, f, g, mode)
    except KeyError as e:
        raise InputFormatError(f"representation is missing the entry {e}") from e
    except (TypeError, ValueError) as e:
        raise InputFormatError(f"invalid representation: {e}") from e


# ---------------------------------------------------------------------------
# residue tuples with flags


def higgs_to_json(h: HiggsTuple) -> dict:
    return {
        "type": type_to_json(h.sigma),
        "mode": h.mode,
        "matrices": [matrix_to_json(m, h.mode) for m in h.matrices],
        "flags": [
            [matrix_to_json(b, h.mode) for b in fl] for fl in h.flags
        ],
    }


def higgs_from_json(data, check=True) -> HiggsTuple:
    if "splitting_type" in data and any(int(d) != 0 for d in data["splitting_type"]):
        raise InputFormatError(
            "the underlying bundle is not a sum of trivial line bundles "
            f"(splitting type {data['splitting_type']}); residue-matrix form "
            "requires a homologically trivial bundle with its global "
            "trivialization"
        )
    try:
        sigma = type_from_json(data["type"])
        mode = data.get("mode", "float")
        mats = [matrix_from_json(m, mode) for m in data["matrices"]]
        flags = [[matrix_from_json(b, mode) for b in fl] for fl in data["flags"]]
        tol = float(data.get("tol", 1e-8))
        return HiggsTuple(
            sigma=sigma, matrices=mats, flags=flags, mode=mode, tol=tol, check=check
        )
    except KeyError as e:
        raise InputFormatError(f"residue tuple is missing the field {e}") from e


def hitchin_to_json(hp: HitchinPoint) -> dict:
    if hp.mode != "exact":
        raise InputFormatError("only exact coefficient points are serialized")
    return {
        "rank": hp.rank,
        "points": [frac_str(p) for p in hp.points],
        "coefficients": [[frac_str(c) for c in p] for p in hp.coeffs],
    }


def hitchin_from_json(data) -> HitchinPoint:
    try:
        return HitchinPoint(
            rank=int(data["rank"]),
            points=tuple(parse_frac(p) for p in data["points"]),
            coeffs=[[parse_frac(c) for c in p] for p in data["coefficients"]],
        )
    except KeyError as e:
        raise InputFormatError(f"coefficient point is missing the field {e}") from e


# ---------------------------------------------------------------------------
# solutions


def solution_to_json(sol: DSSolution, report=None) -> dict:
    out = {
        "mode": sol.mode,
        "matrices": [matrix_to_json(m, sol.mode) for m in sol.matrices],
        "conjugators": [matrix_to_json(p, sol.mode) for p in sol.conjugators],
        "residual": sol.residual,
        "restart_index": sol.restart_index,
        "iterations": sol.iterations,
    }
    if report is not None:
        out["report"] = report
    return out


def solution_from_json(data) -> DSSolution:
    try:
        mode = data.get("mode", "float")
        mats = [matrix_from_json(m, mode) for m in data["matrices"]]
        conj = [matrix_from_json(p, mode) for p in data["conjugators"]]
        if mode == "float":
            mats = [np.asarray(m) for m in mats]
            conj = [np.asarray(p) for p in conj]
        return DSSolution(
            matrices=mats,
            conjugators=conj,
            residual=float(data.get("residual", 0.0)),
            mode=mode,
            restart_index=int(data.get("restart_index", -1)),
            iterations=int(data.get("iterations", 0)),
        )
    except KeyError as e:
        raise InputFormatError(f"solution is missing the field {e}") from e


# ---------------------------------------------------------------------------
# files


def dump(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def dumps(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def load(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise InputFormatError(
            f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    except OSError as e:
        raise InputFormatError(f"{path}: {e.strerror}") from e
