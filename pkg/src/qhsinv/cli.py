"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 parse/schema error.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .alexander import AlexanderFunction, alexander_surgery, link_variables, surgery_variables
from .linking import (LinkPresentation, framing_phase, h1_order, signature, surgery_coefficients,
                      surgery_linking)
from .pairing import (GeneratorSum, decompose, diagonalize_with_lens, iota, pairing_equal)
from .ring import FormalSeries, ParseError, parse_poly, parse_scalar
from .statphase import PhaseData, stationary_contribution, x_variables
from .u1rc import (S3InvariantData, keychain, keychain_rebuilder, lens_ztr, structure_checks, u1rc_surgery,
                   unknot_jones, wrt_sum)


class InputError(Exception):
    """Malformed input: exit code 2."""


def _data_dir() -> Path:
    return Path(str(resources.files("qhsinv") / "data"))


def resolve_input(name: str) -> Path:
    """A path as given, or else the name of a shipped example."""
    path = Path(name)
    if path.exists():
        return path
    shipped = _data_dir() / name
    if shipped.exists():
        return shipped
    raise InputError(f"input file not found: {name}")


def _load_json(name: Optional[str]) -> Dict[str, Any]:
    if name is None:
        raise InputError("this subcommand needs --input FILE")
    path = resolve_input(name)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def _field(d: Dict[str, Any], key: str):
    if key not in d:
        raise InputError(f"input is missing field {key!r}")
    return d[key]


def _presentation(d: Dict[str, Any]) -> LinkPresentation:
    raw = d.get("link", d)
    if not isinstance(raw, dict):
        raise InputError("field 'link' must be an object")
    try:
        return LinkPresentation.from_dict(raw)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise InputError(f"bad link descriptor: {exc}") from None


def _frac_text(x: Fraction) -> str:
    return str(Fraction(x))


def _matrix_text(m: Sequence[Sequence]) -> str:
    return "[" + ", ".join("[" + ", ".join(_frac_text(x) for x in row) + "]" for row in m) + "]"


# -- subcommands ------------------------------------------------------------

def cmd_alexander(args) -> Dict[str, Any]:
    d = _load_json(args.input)
    pres = _presentation(d)
    variables = d.get("variables") or list(link_variables(pres.L) + surgery_variables(pres.Ls))
    if pres.Lp:
        raise InputError("alexander takes no companion components (set Lp = 0)")
    try:
        nabla = AlexanderFunction.parse(str(_field(d, "nabla")), variables, pres.L + pres.Ls)
    except (ParseError, SyntaxError, ValueError) as exc:
        raise InputError(f"cannot parse nabla: {exc}") from None
    result = alexander_surgery(nabla, pres)
    return {"nabla": str(result), "h1": _frac_text(result.manifold_h1),
            "_text": str(result)}


def cmd_surgery(args) -> Dict[str, Any]:
    pres = _presentation(_load_json(args.input))
    lkm = surgery_linking(pres)
    coeffs = surgery_coefficients(pres)
    phase = framing_phase(pres)
    out = {
        "lk_M": [[_frac_text(x) for x in row] for row in lkm],
        "c": [[_frac_text(x) for x in row] for row in coeffs.c],
        "orders": list(coeffs.orders),
        "h1": _frac_text(h1_order(pres)),
        "signature": signature(pres),
        "phase_K": _frac_text(phase.k_coefficient),
        "phase_constant": _frac_text(phase.constant),
        "phase_alpha": [_frac_text(x) for x in phase.alpha_coefficients],
    }
    out["_text"] = "\n".join([
        f"lk_M = {_matrix_text(lkm)}",
        f"c = {_matrix_text(coeffs.c)}",
        f"orders = {list(coeffs.orders)}",
        f"|H1| = {out['h1']}",
        f"signature = {out['signature']}",
        "phase = " + f"({out['phase_K']})*K + ({out['phase_constant']})"
        + "".join(f" + ({a})*(alpha{i + 1}^2 - 1)" for i, a in enumerate(out["phase_alpha"])),
    ])
    return out


def cmd_lens(args) -> Dict[str, Any]:
    if args.p is None or args.q is None:
        raise InputError("lens needs --p and --q")
    series = lens_ztr(args.p, args.q, args.order)
    return {"p": args.p, "q": args.q, "order": args.order, "ztr": str(series), "_text": str(series)}


def cmd_statphase(args) -> Dict[str, Any]:
    d = _load_json(args.input)
    point = [Fraction(str(x)) for x in _field(d, "point")]
    xv = x_variables(len(point))
    try:
        f = parse_poly(str(_field(d, "phase")), xv)
        raw_pref = d.get("prefactor", ["1"])
        if isinstance(raw_pref, str):
            raw_pref = [raw_pref]
        pref_terms = [parse_poly(str(p), xv) for p in raw_pref]
        coupling = parse_scalar(str(d.get("coupling", "1")))
    except (ParseError, SyntaxError, ValueError) as exc:
        raise InputError(f"cannot parse statphase input: {exc}") from None
    phase = PhaseData.from_polynomial(f, point)
    # prefactor terms are given in the shifted variables x - x*
    prefactor = FormalSeries(pref_terms, args.order, "Kinv")
    result = stationary_contribution(phase, prefactor, args.order, coupling)
    text = (f"exp(i*K*({coupling})*({result.phase_value})) * ({result.prefactor}) * "
            f"K^(-{result.kinv_power}) * ({result.series})")
    return {"phase_value": str(result.phase_value), "prefactor": str(result.prefactor),
            "kinv_power": _frac_text(result.kinv_power), "series": str(result.series), "_text": text}


def _u1rc_inputs(d: Dict[str, Any], order: Optional[int]):
    if "keychain" in d:
        kc = d["keychain"]
        try:
            return keychain(int(kc["framing"]), tuple(kc.get("link_orientations", (1,))),
                            tuple(kc.get("companion_colors", ())),
                            int(kc.get("order", 2 if order is None else order)),
                            kc.get("casson_walker"))
        except KeyError as exc:
            raise InputError(f"keychain is missing field {exc.args[0]!r}") from None
    pres = _presentation(d)
    try:
        data = S3InvariantData.from_dict(_field(d, "data"), pres.L + pres.Lp + pres.Ls)
    except (ParseError, SyntaxError, KeyError) as exc:
        raise InputError(f"cannot parse invariant data: {exc}") from None
    return data, pres


def cmd_u1rc(args) -> Dict[str, Any]:
    d = _load_json(args.input)
    data, pres = _u1rc_inputs(d, args.order)
    result = u1rc_surgery(data, pres, args.order)
    out = result.to_dict()
    text = str(result)
    if args.checks:
        kc = d.get("keychain")
        rebuild = None
        if kc is not None:
            rebuild = keychain_rebuilder(int(kc["framing"]), result.order, kc.get("casson_walker"))
        checks = structure_checks(result, rebuild)
        out["checks"] = {k: v for k, v in sorted(checks.items())}
        text += "\n" + "\n".join(f"check {k}: {_check_word(v)}" for k, v in sorted(checks.items()))
    out["_text"] = text
    return out


def _check_word(v) -> str:
    return "n/a" if v is None else ("pass" if v else "FAIL")


def cmd_wrt(args) -> Dict[str, Any]:
    d = _load_json(args.input)
    pres = _presentation(d)
    if args.K is None:
        raise InputError("wrt needs --K")
    n = pres.n_components
    if any(pres.lk[i][j] for i in range(n) for j in range(n) if i != j):
        raise ValueError("the CLI evaluates wrt only for unlinked unknots (colored Jones = product of [n])")
    colors = [int(c) for c in (args.colors.split(",") if args.colors else [])]
    z = wrt_sum(pres, unknot_jones(args.K), args.K, colors)
    # drop rounding noise so the printed digits are platform independent
    scale = max(abs(z), 1.0)
    z = complex(0.0 if abs(z.real) < 1e-10 * scale else z.real, 0.0 if abs(z.imag) < 1e-10 * scale else z.imag)
    text = f"{z.real:.12g} {'+' if z.imag >= 0 else '-'} {abs(z.imag):.12g}*i"
    return {"K": args.K, "re": float(f"{z.real:.12g}"), "im": float(f"{z.imag:.12g}"), "_text": text}


def _parse_matrix(text: str) -> List[List[int]]:
    try:
        m = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"matrix must be JSON, e.g. [[0,2],[2,0]] ({exc})") from None
    if not isinstance(m, list) or not all(isinstance(r, list) for r in m):
        raise InputError("matrix must be a list of rows")
    try:
        return [[int(x) for x in r] for r in m]
    except (TypeError, ValueError):
        raise InputError("matrix entries must be integers") from None


def _parse_sum(text: str) -> GeneratorSum:
    try:
        return GeneratorSum.parse(text)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_pairing(args) -> Dict[str, Any]:
    action, operands = args.action, args.operands
    need = {"diagonalize": 1, "decompose": 1, "equal": 2, "iota": 1}
    if action not in need:
        raise InputError(f"unknown pairing action {action!r}")
    if len(operands) != need[action]:
        raise InputError(f"pairing {action} takes {need[action]} operand(s)")
    if action == "diagonalize":
        d = diagonalize_with_lens(_parse_sum(operands[0]))
        return {"lens": [f"[{b}/{a}]" for b, a in d.lens], "diag": list(d.diagonal), "_text": str(d)}
    if action == "decompose":
        g = decompose(iota(_parse_matrix(operands[0])), args.bound)
        return {"generators": str(g), "_text": str(g)}
    if action == "iota":
        p = iota(_parse_matrix(operands[0]))
        return {"orders": list(p.group.cyclic_orders), "gram": [[str(x) for x in r] for r in p.gram],
                "_text": str(p)}
    a, b = (_parse_sum(x).pairing() for x in operands)
    eq = pairing_equal(a, b, args.bound)
    return {"equal": eq, "_text": "true" if eq else "false"}


COMMANDS: Dict[str, Callable] = {
    "alexander": cmd_alexander, "surgery": cmd_surgery, "lens": cmd_lens, "statphase": cmd_statphase,
    "u1rc": cmd_u1rc, "wrt": cmd_wrt, "pairing": cmd_pairing,
}


def _nonnegative(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("order must be >= 0")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qhsinv", description="Exact perturbative invariants of rational homology spheres.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--input", "--file", dest="input", help="JSON input (path or shipped example name)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, order_default=None):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--order", type=_nonnegative, default=order_default)
        return p

    add("alexander", "Alexander-Conway function after surgery")
    add("surgery", "linking data and framing phase of a surgery presentation")
    p = add("lens", "trivial connection contribution of a lens space", 3)
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    add("statphase", "stationary phase contribution of a polynomial phase", 2)
    p = add("u1rc", "U(1)-reducible connection contribution after surgery")
    p.add_argument("--checks", action="store_true", help="also run the structure checks")
    p = add("wrt", "numeric WRT sum for surgery on unlinked unknots")
    p.add_argument("--K", type=int)
    p.add_argument("--colors", help="comma separated link colors")
    p = add("pairing", "linking pairings: diagonalize | decompose | equal | iota")
    p.add_argument("action")
    p.add_argument("operands", nargs="*")
    p.add_argument("--bound", type=int, default=4096)
    return parser


def render(out: Dict[str, Any], fmt: str) -> str:
    if fmt == "json":
        return json.dumps({k: v for k, v in out.items() if k != "_text"}, sort_keys=True, indent=2)
    return out["_text"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        out = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(render(out, args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
