"""Command-line front end.

Subcommands
    analyze     filtration, growth vector and nondegeneracy report
    complement  minimal rigid complement (``--alternate`` for the variant)
    check       validate a user-supplied complement and its rigidity
    report      full machine-readable report plus text summary

Exit codes: 0 success, 2 degenerate or invalid structure, 1 I/O or parse
errors.  JSON output is deterministic for a fixed input and seed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .complement import (
    GradedComplement,
    LevelBasis,
    adapted_frame,
    canonical_basis,
    minimal_rigid_complement,
    solve_v_normal,
    verify_v_rigid,
)
from .errors import (
    JacobiViolation,
    NotBracketGenerating,
    NotSemiJNondegenerate,
    ParseError,
    SrgeomError,
    WrongStep,
)
from .geometry import (
    connection_and_torsion,
    horizontal_laplacian_coeffs,
    isometry_dim_bound,
    popp_volume,
    vnormal_vrigid_flags,
)
from .jmaps import check_semi_j_nondegenerate, check_step2_conditions
from .linalg import max_principal_angle, orthonormalize
from .structure import parse_check_file, parse_structure, quotient_tower

NOTES = (
    "stage loop runs from level step-1 down to 2; the final level-2 step is "
    "trace constrained",
    "connection on horizontal sections follows the same two rules with the "
    "horizontal bundle treated as level 1 (interpretation)",
)


def _fmt_vec(v) -> list[float]:
    out = []
    for x in np.asarray(v, dtype=float):
        r = round(float(x), 12)
        out.append(0.0 if r == 0 else r)
    return out


def _fmt_basis(mat) -> list[list[float]]:
    return [_fmt_vec(row) for row in np.atleast_2d(mat)]


def _complement_doc(comp: GradedComplement, tower, spec) -> dict:
    bases = {
        str(lb.level): _fmt_basis(canonical_basis(lb.basis, tower, spec.tol))
        for lb in comp.levels
    }
    return {
        "variant": comp.provenance,
        "bases": bases,
        "v_rigid_residual": verify_v_rigid(comp, spec),
    }


def _nondeg_doc(report, step2=None) -> dict:
    doc = {
        "overall": report.overall,
        "levels": [
            {
                "level": lv.level,
                "injective": lv.injective,
                "kernel_dim": lv.kernel_dim,
                "smallest_singular_value": lv.sigma_min,
            }
            for lv in report.levels
        ],
        "trace_surjective": report.trace_surjective,
    }
    if step2 is not None:
        doc["step2"] = {
            "j_nondegenerate": step2.j_nondegenerate,
            "iso_covector_exists": step2.iso_covector_exists,
            "kernel_sum_condition": step2.kernel_sum_condition,
            "seed": step2.seed,
            "n_samples": step2.n_samples,
            "min_abs_det": step2.min_abs_det,
        }
    return doc


def _structure_doc(spec) -> dict:
    brackets = []
    for i in range(spec.n):
        for j in range(i + 1, spec.n):
            terms = [
                [spec.names[k], float(spec.c[i, j, k])]
                for k in range(spec.n)
                if abs(spec.c[i, j, k]) > 0
            ]
            if terms:
                brackets.append({"pair": [spec.names[i], spec.names[j]], "terms": terms})
    return {
        "dim": spec.n,
        "horizontal": spec.d1,
        "names": list(spec.names),
        "brackets": brackets,
    }


def build_report(spec, tol: float, seed: int, include_alternate: bool) -> dict:
    """Assemble the full report document for a validated structure."""
    tower = quotient_tower(spec)
    nondeg = check_semi_j_nondegenerate(spec, tower)
    step2 = (
        check_step2_conditions(spec, tower, seed=seed) if tower.step == 2 else None
    )
    doc = {
        "tool": "srgeom",
        "version": __version__,
        "tolerance": tol,
        "seed": seed,
        "structure": _structure_doc(spec),
        "growth": list(tower.filtration.growth),
        "step": tower.step,
        "nondegeneracy": _nondeg_doc(nondeg, step2),
        "notes": list(NOTES),
    }
    if not nondeg.overall:
        bad = nondeg.first_degenerate_level()
        doc["error"] = {
            "type": "NotSemiJNondegenerate",
            "level": bad.level,
            "kernel_dim": bad.kernel_dim,
        }
        return doc
    comp = minimal_rigid_complement(spec, tower, report=nondeg)
    doc["complement"] = _complement_doc(comp, tower, spec)
    doc["complement"]["v_rigid"] = (
        doc["complement"]["v_rigid_residual"] <= 1e-9 * max(1.0, float(np.abs(spec.c).max()))
    )
    if include_alternate:
        alt = minimal_rigid_complement(spec, tower, variant="alternate", report=nondeg)
        doc["alternate_complement"] = _complement_doc(alt, tower, spec)
    vnorm = solve_v_normal(spec, tower)
    doc["v_normal"] = {
        "exists": vnorm.exists,
        "residuals": {str(k): v for k, v in sorted(vnorm.residuals.items())},
    }
    doc["popp_density"] = popp_volume(tower)
    table = connection_and_torsion(comp, spec)
    v_normal_flag, v_rigid_flag = vnormal_vrigid_flags(table, comp)
    lap = horizontal_laplacian_coeffs(table, comp)
    doc["connection"] = {
        "torsion_same_level_orthogonal": table.same_level_orthogonal,
        "torsion_cross_level_symmetric": table.cross_level_symmetric,
        "v_normal": v_normal_flag,
        "v_rigid": v_rigid_flag,
        "laplacian_contraction": _fmt_vec(lap.contraction),
        "laplacian_self_adjoint_applicable": lap.self_adjoint_applicable,
    }
    doc["isometry_dimension_bound"] = isometry_dim_bound(spec, tower, nondeg)
    doc["trace"] = [
        {
            "kind": rec.kind,
            "level": rec.level,
            "coframe_level": rec.coframe_level,
            "min_value": rec.value,
            "parameters": _fmt_vec(rec.z),
        }
        for rec in comp.trace
    ]
    return doc


def _text_summary(doc: dict) -> str:
    lines = [
        f"structure: dim {doc['structure']['dim']}, horizontal {doc['structure']['horizontal']}",
        f"growth vector: {doc['growth']}, step {doc['step']}",
        f"nondegenerate: {doc['nondegeneracy']['overall']}",
    ]
    for lv in doc["nondegeneracy"]["levels"]:
        lines.append(
            f"  level {lv['level']}: injective={lv['injective']} "
            f"kernel={lv['kernel_dim']} sigma_min={lv['smallest_singular_value']:.3e}"
        )
    if "error" in doc:
        lines.append(
            f"error: {doc['error']['type']} at level {doc['error']['level']}"
        )
        return "\n".join(lines)
    if "complement" in doc:
        lines.append(f"complement ({doc['complement']['variant']}):")
        for level, basis in sorted(doc["complement"]["bases"].items()):
            for row in basis:
                lines.append(f"  V{level}: {row}")
        lines.append(
            f"v-rigid residual: {doc['complement']['v_rigid_residual']:.3e}"
        )
    if "alternate_complement" in doc:
        lines.append("alternate complement:")
        for level, basis in sorted(doc["alternate_complement"]["bases"].items()):
            for row in basis:
                lines.append(f"  V{level}: {row}")
    if "v_normal" in doc:
        lines.append(f"v-normal exists: {doc['v_normal']['exists']}")
    if "popp_density" in doc:
        lines.append(f"intrinsic volume density: {doc['popp_density']!r}")
    if "isometry_dimension_bound" in doc:
        lines.append(f"isometry dimension bound: {doc['isometry_dimension_bound']}")
    return "\n".join(lines)


def _emit(doc: dict, as_json: bool, out) -> None:
    if as_json:
        print(json.dumps(doc, sort_keys=True, indent=2), file=out)
    else:
        print(_text_summary(doc), file=out)


def _cmd_analyze(args, out) -> int:
    spec = parse_structure(_read(args.input), args.tol)
    tower = quotient_tower(spec)
    nondeg = check_semi_j_nondegenerate(spec, tower)
    step2 = check_step2_conditions(spec, tower, seed=args.seed) if tower.step == 2 else None
    doc = {
        "structure": _structure_doc(spec),
        "growth": list(tower.filtration.growth),
        "step": tower.step,
        "nondegeneracy": _nondeg_doc(nondeg, step2),
    }
    _emit(doc, args.json, out)
    return 0


def _cmd_complement(args, out) -> int:
    spec = parse_structure(_read(args.input), args.tol)
    tower = quotient_tower(spec)
    variant = "alternate" if args.alternate else "minimal-rigid"
    comp = minimal_rigid_complement(spec, tower, variant=variant)
    doc = {
        "growth": list(tower.filtration.growth),
        "step": tower.step,
        "complement": _complement_doc(comp, tower, spec),
    }
    _emit(doc, args.json, out)
    return 0


def _cmd_check(args, out) -> int:
    spec, bases = parse_check_file(_read(args.input), args.tol)
    tower = quotient_tower(spec)
    growth = tower.filtration.growth
    problems: list[str] = []
    levels = []
    expected = set(range(2, tower.step + 1))
    if set(bases) != expected:
        problems.append(
            f"complement blocks for levels {sorted(bases)} do not match "
            f"levels {sorted(expected)}"
        )
    for m in sorted(bases):
        mat = bases[m]
        if m > tower.step:
            continue
        if mat.shape[0] != growth[m - 1]:
            problems.append(
                f"level {m}: {mat.shape[0]} vectors, expected {growth[m - 1]}"
            )
            continue
        for row in mat:
            if not tower.filtration.space(m).contains(row, args.tol * 1e3):
                problems.append(f"level {m}: vector outside the level flag member")
        chart = tower.chart(m, mat)
        if abs(np.linalg.det(chart)) < 1e-9:
            problems.append(f"level {m}: does not project onto the level quotient")
            continue
        gram = chart @ tower.level(m).gram @ chart.T
        onb_coeff = np.linalg.inv(np.linalg.cholesky(gram))
        levels.append(LevelBasis(m, onb_coeff @ mat))
    doc: dict = {"valid": not problems, "problems": problems}
    if problems:
        _emit(doc, args.json, out)
        return 2
    comp = GradedComplement(tuple(levels), "user-supplied")
    residual = verify_v_rigid(comp, spec)
    scale = max(1.0, float(np.abs(spec.c).max()))
    doc["v_rigid_residual"] = residual
    doc["v_rigid"] = bool(residual <= 1e-9 * scale)
    try:
        mrc = minimal_rigid_complement(spec, tower)
        doc["matches_minimal_rigid"] = bool(
            max(
                (
                    max_principal_angle(comp.basis(lb.level), lb.basis)
                    for lb in mrc.levels
                ),
                default=0.0,
            )
            <= 1e-8
        )
    except NotSemiJNondegenerate:
        doc["matches_minimal_rigid"] = None
    _emit(doc, args.json, out)
    return 0


def _cmd_report(args, out) -> int:
    spec = parse_structure(_read(args.input), args.tol)
    doc = build_report(spec, args.tol, args.seed, include_alternate=args.alternate)
    _emit(doc, not args.text, out)
    if "error" in doc:
        return 2
    return 0


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def main(argv: list[str] | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = argparse.ArgumentParser(
        prog="srgeom",
        description="analyze frame-presented sub-Riemannian structures and "
        "construct their minimal rigid complements",
    )
    parser.add_argument("--version", action="version", version=f"srgeom {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("analyze", _cmd_analyze),
        ("complement", _cmd_complement),
        ("check", _cmd_check),
        ("report", _cmd_report),
    ):
        sp = sub.add_parser(name)
        sp.add_argument("input", help="structure file")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--alternate", action="store_true")
        fmt = sp.add_mutually_exclusive_group()
        fmt.add_argument("--json", action="store_true")
        fmt.add_argument("--text", action="store_true")
        sp.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NotSemiJNondegenerate as exc:
        print(
            f"error: NotSemiJNondegenerate: degenerate at level {exc.level} "
            f"(kernel dimension {exc.kernel_dim})",
            file=sys.stderr,
        )
        return 2
    except (JacobiViolation, NotBracketGenerating, WrongStep, SrgeomError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
