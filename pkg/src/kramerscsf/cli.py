"""Command-line interface.

Exit codes: 0 success, 1 a verification check failed, 2 invalid input,
3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import kcsf as kc
from . import modelham as mh
from .detalg import StateVector
from .eig import ConvergenceError
from .spincmp import build_spin_ops, compare_to_kcsf, spin_csf
from .trgen import (
    EXP_TOL,
    MAX_OPEN,
    CapacityError,
    OpenShellBasis,
    build_k,
    build_kplus,
    build_kplus2,
    enumerate_basis,
    verify_exp_map,
)

SCHEMA = "kcsf-1"
EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULT_TOLS = {
    "exp_map": EXP_TOL,
    "k_round": kc.K_ROUND_TOL,
    "pair": kc.PAIR_TOL,
    "rotation": kc.ROTATION_TOL,
    "norm": 1e-8,
    "generation": mh.GEN_TOL,
    "commutation": mh.COMM_TOL,
    "subspace": mh.SUBSPACE_TOL,
    "level_gap": mh.LEVEL_GAP,
    "k_spread": mh.K_SPREAD_TOL,
    "magnetic": 1e-10,
}


class ValidationError(ValueError):
    pass


def fnum(x: float) -> str:
    """17 significant digits; round-trips any double."""
    x = float(x) + 0.0
    return format(x, ".17g")


def tnum(x: float) -> str:
    return format(float(x) + 0.0, ".12g")


def basis_checksum(basis: OpenShellBasis) -> str:
    text = "\n".join(basis.labels("machine"))
    return "sha256:" + hashlib.sha256(text.encode("ascii")).hexdigest()


def _parity_arg(value: str) -> str | None:
    return None if value == "both" else value


def _parity_name(parity: str | None) -> str:
    return parity or "both"


def _matrix(m) -> list[list[str]]:
    return [[fnum(x) for x in row] for row in np.asarray(m)]


def _cmatrix(m) -> list[list[list[str]]]:
    m = np.asarray(m, dtype=complex)
    return [[[fnum(x.real), fnum(x.imag)] for x in row] for row in m]


def _check(name: str, passed: bool, value: float | None = None, tol: float | None = None, **extra) -> dict:
    out = {"name": name, "passed": bool(passed)}
    if value is not None:
        out["value"] = fnum(value)
    if tol is not None:
        out["tol"] = fnum(tol)
    out.update(extra)
    return out


_NUM = {"type": "string", "pattern": r"^-?(inf|nan|[0-9]+(\.[0-9]+)?(e[-+][0-9]+)?)$"}
_NUMS = {"type": "array", "items": _NUM}
_MAT = {"type": "array", "items": _NUMS}
_STRS = {"type": "array", "items": {"type": "string"}}
_INT = {"type": "integer"}
_LEVELS = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["energy", "dim", "k", "kplus2"],
        "properties": {"energy": _NUM, "dim": _INT, "k": {"type": ["integer", "null"]}, "kplus2": _NUMS},
    },
}
_CHECKS = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["name", "passed"],
        "properties": {"name": {"type": "string"}, "passed": {"type": "boolean"}, "value": _NUM, "tol": _NUM},
    },
}
_COMMAND_FIELDS = {
    "csf": {
        "nOpen": _INT, "parity": {"enum": ["even", "odd", "both"]}, "basisChecksum": {"type": "string"},
        "labels": _STRS, "displayLabels": _STRS, "kplus2": _MAT, "eigenvalues": _NUMS,
        "k": {"type": "array", "items": _INT}, "multiplicities": {"type": "object"}, "vectors": _MAT,
        "pairing": {"type": "object"},
    },
    "spin": {
        "nOpen": _INT, "basisChecksum": {"type": "string"}, "labels": _STRS, "displayLabels": _STRS,
        "s2": _MAT, "sz": _NUMS, "eigenvalues": _NUMS, "spin": _MAT, "vectors": _MAT,
    },
    "compare": {
        "nOpen": _INT, "basisChecksum": {"type": "string"}, "spin": _MAT, "k": {"type": "array", "items": _INT},
        "overlaps": _MAT, "exact": {"type": "object"}, "mixed": {"type": "object"},
    },
    "verify": {"target": {"enum": ["kcsf", "model"]}, "checks": _CHECKS, "passed": {"type": "boolean"}},
    "contamination": {
        "basisChecksum": {"type": "string"}, "nOpen": _INT, "parity": {"enum": ["even", "odd"]},
        "norm": _NUM, "renormalized": {"type": "boolean"}, "targetK": _INT, "targetKSquared": _NUM,
        "expectation": _NUM, "contamination": _NUM,
    },
    "model": {
        "pairs": _INT, "electrons": _INT, "so": _NUM, "seed": _INT, "dimension": _INT,
        "commutation": {"type": "object", "additionalProperties": _NUM}, "levels": _LEVELS,
    },
}


def json_schema() -> dict:
    """JSON Schema for every document emitted under ``SCHEMA``."""
    branches = []
    for cmd, props in _COMMAND_FIELDS.items():
        branches.append(
            {
                "if": {"properties": {"command": {"const": cmd}}},
                "then": {"required": sorted(props), "properties": props},
            }
        )
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$id": SCHEMA,
        "type": "object",
        "required": ["schema", "command"],
        "properties": {"schema": {"const": SCHEMA}, "command": {"enum": sorted(_COMMAND_FIELDS)}},
        "allOf": branches,
    }


# ---------------------------------------------------------------- commands


def cmd_csf(args, tols) -> tuple[dict, int]:
    parity = _parity_arg(args.parity)
    if args.open_shells == 0:
        parity = "even"
    kset = kc.make_kcsf(args.open_shells, parity, args.closed_pairs)
    basis = kset.basis
    k2 = build_kplus2(basis)
    out = {
        "schema": SCHEMA,
        "command": "csf",
        "nOpen": basis.n_open,
        "parity": _parity_name(basis.parity),
        "closedPairs": sorted(basis.closed_pairs),
        "basisChecksum": basis_checksum(basis),
        "labels": basis.labels("machine"),
        "displayLabels": basis.labels("text"),
        "kplus2": _matrix(k2),
        "eigenvalues": [fnum(v) for v in kset.values],
        "k": list(kset.k_labels),
        "multiplicities": {str(k): v for k, v in kset.multiplicities().items()},
        "vectors": _matrix(kset.vectors),
        "pairing": {str(i): j for i, j in sorted(kset.pairing.items())},
    }
    if args.export_vector is not None:
        if args.out is None:
            raise ValidationError("--export-vector requires --out")
        if not 0 <= args.export_vector < len(kset):
            raise ValidationError(f"vector index {args.export_vector} outside [0, {len(kset)})")
        coeffs = kset.vectors[:, args.export_vector]
        write_coeff_file(args.out, basis, coeffs)
        out["exported"] = {"index": args.export_vector, "k": kset.k_labels[args.export_vector], "path": str(args.out)}
    return out, EXIT_OK


def cmd_spin(args, tols) -> tuple[dict, int]:
    parity = _parity_arg(args.parity)
    if args.open_shells == 0:
        parity = "even"
    ops = build_spin_ops(args.open_shells, parity, args.closed_pairs)
    sp = spin_csf(args.open_shells, parity, args.closed_pairs)
    out = {
        "schema": SCHEMA,
        "command": "spin",
        "nOpen": args.open_shells,
        "parity": _parity_name(parity),
        "basisChecksum": basis_checksum(ops.basis),
        "labels": ops.basis.labels("machine"),
        "displayLabels": ops.basis.labels("text"),
        "s2": _matrix(ops.s2),
        "sz": [fnum(x) for x in np.diag(ops.sz)],
        "eigenvalues": [fnum(v) for v in sp.values],
        "spin": [[fnum(s), fnum(m)] for s, m in sp.labels],
        "vectors": _matrix(sp.vectors),
    }
    return out, EXIT_OK


def cmd_compare(args, tols) -> tuple[dict, int]:
    parity = _parity_arg(args.parity)
    if args.open_shells == 0:
        parity = "even"
    sp = spin_csf(args.open_shells, parity, args.closed_pairs)
    kset = kc.make_kcsf(args.open_shells, parity, args.closed_pairs)
    rep = compare_to_kcsf(sp, kset)
    out = {
        "schema": SCHEMA,
        "command": "compare",
        "nOpen": args.open_shells,
        "parity": _parity_name(parity),
        "basisChecksum": basis_checksum(kset.basis),
        "spin": [[fnum(s), fnum(m)] for s, m in sp.labels],
        "k": list(kset.k_labels),
        "overlaps": _matrix(rep.overlaps.real),
        "exact": {str(i): j for i, j in sorted(rep.exact.items())},
        "mixed": {str(i): js for i, js in sorted(rep.mixed.items())},
    }
    return out, EXIT_OK


def verify_kcsf_checks(n_open: int, tols: dict, closed_pairs=()) -> list[dict]:
    checks = []
    full = enumerate_basis(n_open, None, closed_pairs)
    rep = verify_exp_map(full, tols["exp_map"])
    checks.append(_check("exp_map_half_turn", rep.half_turn_dev <= rep.tol, rep.half_turn_dev, rep.tol))
    checks.append(_check("exp_map_full_turn", rep.full_turn_dev <= rep.tol, rep.full_turn_dev, rep.tol))

    kp = build_kplus(full).mat
    checks.append(_check("kplus_antisymmetric", np.array_equal(kp.T, -kp)))
    km = build_k(full).mat
    sign = (-1) ** full.n_electrons
    checks.append(_check("k_squared_sign", np.array_equal(km @ km, sign * np.eye(len(km)))))
    k2 = kp @ kp
    checks.append(_check("kplus2_diagonal", bool(np.all(np.diag(k2) == -n_open))))

    parities = ["even"] if n_open == 0 else ["even", "odd"]
    if n_open:
        h = 2 ** (n_open - 1)
        checks.append(_check("parity_block_diagonal", not np.any(k2[:h, h:]) and not np.any(k2[h:, :h])))
        if full.n_electrons % 2:
            img = km[h:, :h]
            same = np.array_equal(img.T @ k2[h:, h:] @ img, k2[:h, :h])
            checks.append(_check("odd_n_blocks_equal_in_k_image_order", same))

    for parity in parities:
        kset = kc.make_kcsf(n_open, parity, closed_pairs)
        b = kset.basis
        kb = build_kplus2(b)
        res = float(np.abs(kb @ kset.vectors - kset.vectors * kset.values).max())
        checks.append(_check(f"{parity}_eigen_residual", res <= 1e-9, res, 1e-9))
        ks = kset.k_labels
        expected = {k: kc.expected_multiplicity(n_open, k) for k in range(n_open % 2, n_open + 1, 2)}
        got = kset.multiplicities()
        checks.append(
            _check(
                f"{parity}_spectrum",
                got == {k: v for k, v in expected.items() if v} and max(ks) == n_open,
                spectrum=[fnum(-(k * k)) + "x" + str(c) for k, c in got.items()],
            )
        )

    kset = kc.make_kcsf(n_open, None, closed_pairs) if n_open else kc.make_kcsf(0, "even", closed_pairs)
    pair_worst, rot_worst = 0.0, 0.0
    pair_ok = rot_ok = True
    zero_ok = True
    for i, k in enumerate(kset.k_labels):
        r = kc.kramers_rotation_check(kset, i, tols["rotation"])
        rot_ok &= r.passed
        rot_worst = max(rot_worst, r.deviation, r.tilde_deviation)
        if k:
            _, pr = kc.make_pair(kset, i, tols["pair"])
            pair_ok &= pr.passed
            pair_worst = max(pair_worst, pr.norm_dev, pr.overlap, pr.eigen_dev, pr.back_dev)
        else:
            v = kset.full_vector(i)
            zero_ok &= float(np.abs(build_kplus(kset.basis)(v)).max()) <= tols["pair"]
    checks.append(_check("pairing", pair_ok, pair_worst, tols["pair"]))
    checks.append(_check("kramers_rotation", rot_ok, rot_worst, tols["rotation"]))
    checks.append(_check("k_zero_annihilated", zero_ok))
    return checks


def verify_model_checks(m: int, n: int, so: float, seed: int, tols: dict, break_tr: bool = False) -> tuple[list[dict], dict]:
    ints = mh.gen_integrals(m, so, seed)
    res = ints.residuals()
    checks = [_check("integral_identities", max(res.values()) <= tols["generation"], max(res.values()), tols["generation"])]
    if break_tr:
        ints = mh.break_time_reversal(ints)
    ham, dets = mh.build_hamiltonian(ints, n)
    com = mh.verify_commutation(ham, dets, tols["commutation"])
    checks.append(_check("commutation_kplus2", com.kplus2_norm <= com.tol, com.kplus2_norm, com.tol))
    checks.append(_check("commutation_k", com.k_norm <= com.tol, com.k_norm, com.tol))
    lv = mh.level_analysis(ham, dets, tols["level_gap"], tols["k_spread"])
    dims_ok = n % 2 == 0 or all(d % 2 == 0 for d in lv.dims)
    checks.append(_check("odd_n_even_level_dims", dims_ok))
    single = not lv.mixed_levels
    checks.append(_check("single_k_per_level", single, mixed=len(lv.mixed_levels)))
    nd_ok = all(l.k == 0 and n % 2 == 0 for l in lv.levels if l.dim == 1)
    checks.append(_check("nondegenerate_implies_k0_even_n", nd_ok))
    pr = mh.paired_level_residuals(ham, dets, lv)
    worst = max(pr, default=0.0)
    checks.append(_check("paired_levels", worst <= tols["subspace"], worst, tols["subspace"]))
    vecs, dbl = mh.tr_adapted_level_basis(lv, dets)
    op = mh.one_body_matrix(mh.tr_odd_operator(ints), dets)
    mag = mh.magnetic_operator_checks(op, vecs, mh.fock_k(dets), n, dbl, tols["magnetic"])
    checks.append(_check("magnetic_selection_rules", mag.passed, mag.purity_max, tols["magnetic"]))
    info = {
        "dimension": len(dets),
        "levels": [
            {"energy": fnum(l.energy), "dim": l.dim, "k": l.k, "kplus2": [fnum(x) for x in l.kplus2_values]}
            for l in lv.levels
        ],
        "imagNorm": fnum(com.imag_norm),
    }
    return checks, info


def cmd_verify(args, tols) -> tuple[dict, int]:
    out = {"schema": SCHEMA, "command": "verify", "target": args.target}
    if args.target == "kcsf":
        checks = verify_kcsf_checks(args.open_shells, tols, args.closed_pairs)
        out["nOpen"] = args.open_shells
        out["basisChecksum"] = basis_checksum(enumerate_basis(args.open_shells, None, args.closed_pairs))
    else:
        _validate_model(args)
        checks, info = verify_model_checks(args.pairs, args.electrons, args.so, args.seed, tols, args.break_tr)
        out.update({"pairs": args.pairs, "electrons": args.electrons, "so": fnum(args.so), "seed": args.seed,
                    "breakTr": bool(args.break_tr)})
        out.update(info)
    out["checks"] = checks
    ok = all(c["passed"] for c in checks)
    out["passed"] = ok
    return out, EXIT_OK if ok else EXIT_FAIL


def _validate_model(args):
    if not 1 <= args.pairs <= mh.MAX_PAIRS:
        raise ValidationError(f"--pairs must lie in [1, {mh.MAX_PAIRS}]")
    if not 1 <= args.electrons <= 2 * args.pairs:
        raise ValidationError(f"--electrons must lie in [1, {2 * args.pairs}]")
    if math.comb(2 * args.pairs, args.electrons) > mh.MAX_DIM:
        raise ValidationError("Fock space too large")
    if not math.isfinite(args.so) or args.so < 0:
        raise ValidationError("--so must be a finite non-negative number")
    if args.seed < 0:
        raise ValidationError("--seed must be non-negative")


def cmd_model(args, tols) -> tuple[dict, int]:
    if args.integrals_in is not None:
        try:
            ints = mh.SpinorIntegrals.from_json(Path(args.integrals_in).read_text())
        except (OSError, ValueError, KeyError) as e:
            raise ValidationError(f"cannot read integrals: {e}") from None
        if not 1 <= args.electrons <= 2 * ints.n_pairs:
            raise ValidationError(f"--electrons must lie in [1, {2 * ints.n_pairs}]")
    else:
        _validate_model(args)
        ints = mh.gen_integrals(args.pairs, args.so, args.seed)
    if args.break_tr:
        ints = mh.break_time_reversal(ints)
    if args.integrals_out is not None:
        Path(args.integrals_out).write_text(json.dumps(ints.to_json()) + "\n")
    ham, dets = mh.build_hamiltonian(ints, args.electrons)
    com = mh.verify_commutation(ham, dets, tols["commutation"])
    lv = mh.level_analysis(ham, dets, tols["level_gap"], tols["k_spread"])
    out = {
        "schema": SCHEMA,
        "command": "model",
        "pairs": ints.n_pairs,
        "electrons": args.electrons,
        "so": fnum(ints.so_strength),
        "seed": ints.seed,
        "dimension": len(dets),
        "integralResiduals": {k: fnum(v) for k, v in ints.residuals().items()},
        "commutation": {"kplus2": fnum(com.kplus2_norm), "kplus": fnum(com.kplus_norm), "k": fnum(com.k_norm)},
        "levels": [
            {"energy": fnum(l.energy), "dim": l.dim, "k": l.k, "kplus2": [fnum(x) for x in l.kplus2_values]}
            for l in lv.levels
        ],
        "violations": lv.violations,
    }
    return out, EXIT_OK


# ---------------------------------------------------------------- coefficient files


def write_coeff_file(path, basis: OpenShellBasis, coeffs) -> None:
    coeffs = np.asarray(coeffs, dtype=complex)
    data = {
        "schema": SCHEMA,
        "basisChecksum": basis_checksum(basis),
        "parity": _parity_name(basis.parity),
        "nOpen": basis.n_open,
        "closedPairs": sorted(basis.closed_pairs),
        "labels": basis.labels("machine"),
        "coeffs": [[fnum(c.real), fnum(c.imag)] for c in coeffs],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def _real(x) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise ValidationError(f"bad number {x!r}")
    try:
        return float(x)
    except ValueError:
        raise ValidationError(f"bad number {x!r}") from None


def read_coeff_file(path) -> tuple[OpenShellBasis, np.ndarray]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read coefficient file: {e}") from None
    if not isinstance(data, dict) or data.get("schema") != SCHEMA:
        raise ValidationError(f"coefficient file schema must be {SCHEMA!r}")
    for key in ("basisChecksum", "parity", "nOpen", "coeffs"):
        if key not in data:
            raise ValidationError(f"coefficient file lacks {key!r}")
    parity = data["parity"]
    if parity not in ("even", "odd"):
        raise ValidationError(f"mixed-parity coefficient files are rejected (parity={parity!r})")
    n_open = data["nOpen"]
    if not isinstance(n_open, int) or not 0 <= n_open <= MAX_OPEN:
        raise ValidationError(f"nOpen must be an integer in [0, {MAX_OPEN}]")
    closed = data.get("closedPairs", [])
    try:
        basis = enumerate_basis(n_open, parity, closed)
    except ValueError as e:
        raise ValidationError(str(e)) from None
    labels = data.get("labels")
    if labels is not None:
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ValidationError("labels must be a list of strings")
        # closed pairs add the same barred count to every label, so mixing shows up regardless
        if len({sum(t.startswith("~") for t in lab.split()) % 2 for lab in labels}) > 1:
            raise ValidationError("mixed-parity coefficient files are rejected (labels mix parities)")
    want = basis_checksum(basis)
    have = data["basisChecksum"]
    if labels is not None:
        # the labels are authoritative; a stale stored checksum must not hide a reordering
        have = "sha256:" + hashlib.sha256("\n".join(labels).encode()).hexdigest()
        if data["basisChecksum"] != have:
            raise ValidationError(f"basis checksum mismatch: file labels {have} stored {data['basisChecksum']}")
    if have != want:
        raise ValidationError(f"basis checksum mismatch: file {have} expected {want}")
    raw = data["coeffs"]
    if not isinstance(raw, list) or len(raw) != len(basis):
        raise ValidationError(f"expected {len(basis)} coefficients")
    coeffs = []
    for c in raw:
        if not isinstance(c, list) or len(c) != 2:
            raise ValidationError("coefficients must be [re, im] pairs")
        coeffs.append(complex(_real(c[0]), _real(c[1])))
    return basis, np.array(coeffs)


def cmd_contamination(args, tols) -> tuple[dict, int]:
    basis, coeffs = read_coeff_file(args.coeffs)
    state = StateVector(basis.dets, coeffs)
    nrm = state.norm
    if abs(nrm - 1.0) > tols["norm"]:
        if not args.renorm:
            raise ValidationError(f"state norm {fnum(nrm)} differs from 1 by more than {tols['norm']:g}; use --renorm")
        state = state.normalized()
    exp = kc.kplus2_expectation(state, basis)
    if args.infer:
        k = kc.infer_k(exp, basis.n_open)
    elif args.target_k is None:
        raise ValidationError("give --target-k or --infer")
    else:
        k = args.target_k
        if k < 0:
            raise ValidationError("--target-k must be non-negative")
    rep = kc.contamination(state, k, renormalize=True, tol=math.inf)
    out = {
        "schema": SCHEMA,
        "command": "contamination",
        "basisChecksum": basis_checksum(basis),
        "nOpen": basis.n_open,
        "parity": basis.parity,
        "norm": fnum(nrm),
        "renormalized": bool(abs(nrm - 1.0) > tols["norm"]),
        "targetK": k,
        "inferred": bool(args.infer),
        "targetKSquared": fnum(-(k * k)),
        "expectation": fnum(exp),
        "contamination": fnum(rep.contamination),
    }
    return out, EXIT_OK


# ---------------------------------------------------------------- text rendering


def _fmt_text(v) -> str:
    if isinstance(v, str):
        try:
            return tnum(float(v))
        except ValueError:
            return v
    if isinstance(v, bool) or v is None:
        return str(v).lower() if isinstance(v, bool) else "-"
    if isinstance(v, (int, float)):
        return str(v)
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_text(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt_text(x)}" for k, x in v.items()) + "}"
    return str(v)


def render_text(out: dict) -> str:
    lines = []
    for key, val in out.items():
        if key == "labels":
            from .detalg import Determinant

            n_pairs = max(
                [max(int(t.lstrip("~")) for t in lab.split()) for lab in val if lab] + [out.get("nOpen", 0)]
            )
            disp = [Determinant.from_label(lab, n_pairs)[0].label("text") if lab else "" for lab in val]
            lines.append("labels:")
            lines += [f"  {i}: {d}" for i, d in enumerate(disp)]
        elif key == "checks":
            lines.append("checks:")
            for c in val:
                status = "PASS" if c["passed"] else "FAIL"
                extra = " ".join(f"{k}={_fmt_text(v)}" for k, v in c.items() if k not in ("name", "passed"))
                lines.append(f"  {status} {c['name']} {extra}".rstrip())
        elif isinstance(val, list) and val and isinstance(val[0], (list, dict)):
            lines.append(f"{key}:")
            lines += [f"  {_fmt_text(row)}" for row in val]
        else:
            lines.append(f"{key}: {_fmt_text(val)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- entry point


def _parse_tols(items) -> dict:
    tols = dict(DEFAULT_TOLS)
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in tols:
            raise ValidationError(f"unknown tolerance {name!r}; known: {', '.join(sorted(tols))}")
        try:
            v = float(value)
        except ValueError:
            raise ValidationError(f"tolerance {name} needs a number, got {value!r}") from None
        if not (v > 0 and math.isfinite(v)):
            raise ValidationError(f"tolerance {name} must be positive and finite")
        tols[name] = v
    return tols


def _open_shells(text: str) -> int:
    v = int(text)
    if not 0 <= v <= MAX_OPEN:
        raise argparse.ArgumentTypeError(f"must lie in [0, {MAX_OPEN}]")
    return v


def _pair_list(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        vals = tuple(int(x) - 1 for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("closed pairs are comma-separated 1-based integers") from None
    if any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("closed pairs are 1-based")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a tolerance")

    p = argparse.ArgumentParser(prog="kramerscsf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def shells(sp, default=2):
        sp.add_argument("--open-shells", type=_open_shells, default=default)
        sp.add_argument("--closed-pairs", type=_pair_list, default=(), help="1-based, comma-separated")

    s = sub.add_parser("csf", parents=[common], help="KCSFs of one or both parity branches")
    shells(s)
    s.add_argument("--parity", choices=("even", "odd", "both"), default="even")
    s.add_argument("--export-vector", type=int)
    s.add_argument("--out")

    for name, helptext in (("spin", "spin-adapted CSFs"), ("compare", "overlaps of spin CSFs with KCSFs")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        shells(s)
        s.add_argument("--parity", choices=("even", "odd", "both"), default="both")

    s = sub.add_parser("verify", parents=[common], help="run invariant checks")
    s.add_argument("target", nargs="?", choices=("kcsf", "model"), default="kcsf")
    shells(s)
    s.add_argument("--pairs", type=int, default=3)
    s.add_argument("--electrons", type=int, default=2)
    s.add_argument("--so", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--break-tr", action="store_true")

    s = sub.add_parser("contamination", parents=[common], help="Kramers contamination of a coefficient file")
    s.add_argument("coeffs")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--target-k", type=int)
    g.add_argument("--infer", action="store_true")
    s.add_argument("--renorm", action="store_true")

    s = sub.add_parser("model", parents=[common], help="model Hamiltonian levels")
    s.add_argument("--pairs", type=int, default=3)
    s.add_argument("--electrons", type=int, default=2)
    s.add_argument("--so", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--break-tr", action="store_true")
    s.add_argument("--integrals-in")
    s.add_argument("--integrals-out")
    return p


COMMANDS = {
    "csf": cmd_csf,
    "spin": cmd_spin,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "contamination": cmd_contamination,
    "model": cmd_model,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and EXIT_INVALID
    try:
        tols = _parse_tols(args.tol)
        out, code = COMMANDS[args.command](args, tols)
    except (ValidationError, CapacityError, kc.BasisMismatchError, kc.NotNormalizedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (AssertionError, ConvergenceError, ArithmeticError) as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.format == "json":
        sys.stdout.write(json.dumps(out, indent=2) + "\n")
    else:
        sys.stdout.write(render_text(out))
    return code


if __name__ == "__main__":
    sys.exit(main())
