"""``macstbc`` command line: verify, inspect, simulate, list-designs.

Every flag overrides the key of the same name in the optional JSON config.
Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
config error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from macstbc.design_algebra import NAMED_DESIGNS, ComplexLinearDesign, DesignError, named_design
from macstbc.lattice import (
    build_lattice_generator,
    check_rc_monomial,
    extract_coefficient_matrices,
    receive_antennas,
)
from macstbc.qr_structure import (
    RankDeficiencyError,
    StructureClass,
    classify_design,
    extract_blocks,
    qr_decompose,
    verify_proposition1,
    verify_theorem2,
)
from macstbc.simulation import DECODERS, SimConfig, run_sweep, sample_channel
from macstbc.sphere_decoder import DecoderRefusal

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "design": {"type": "string"},
        "design_file": {"type": "string"},
        "claim": {"enum": [c.value for c in StructureClass]},
        "nt": {"type": ["integer", "null"], "minimum": 2},
        "k": {"type": ["integer", "null"], "minimum": 2},
        "qam": {"type": "integer", "minimum": 4},
        "snr_db": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "decoder": {"enum": list(DECODERS)},
        "out": {"type": ["string", "null"]},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {
    "design": "alamouti",
    "nt": None,
    "k": None,
    "qam": 4,
    "snr_db": [0.0, 10.0, 20.0],
    "trials": 500,
    "seed": 0,
    "decoder": "conditional",
    "out": None,
    "tol": 1e-9,
    "jobs": os.cpu_count() or 1,
}

DESIGN_NOTES = {
    "alamouti": "2x2 Alamouti code (Nt=2, k=2); reduced ASDC",
    "case1": "even Nt, even k: stacked Alamouti (x) I blocks; reduced ASDC",
    "case2": "even Nt, odd k: case1 plus x_k I; reduced ASDC",
    "case3": "odd Nt, even k: case1 for Nt+1 minus last column; reduced ASDC",
    "case4": "odd Nt, odd k: case2 for Nt+1 minus last column; reduced ASDC",
    "cod": "square complex orthogonal design, Nt = 2^a, k = a+1; reduced WSDC for Nt > 2",
    "spatial": "uncoded spatial multiplexing, k = Nt^2; unstructured",
}


class ConfigError(Exception):
    pass


def _snr_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}")


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config file")
    common.add_argument("--design", help=f"built-in design: {', '.join(NAMED_DESIGNS)}")
    common.add_argument("--nt", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--qam", type=int)
    common.add_argument("--snr", type=_snr_list, dest="snr_db", help="comma-separated SNRs in dB")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--decoder", choices=DECODERS)
    common.add_argument("--out", help="output file (verify) or directory (inspect, simulate)")
    common.add_argument("--tol", type=float)
    common.add_argument("--jobs", type=int)

    parser = argparse.ArgumentParser(prog="macstbc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="exact and numerical R-structure report")
    sub.add_parser("inspect", parents=[common], help="dump design, M, C_i and the R zero pattern")
    sub.add_parser("simulate", parents=[common], help="Monte Carlo SNR sweep")
    sub.add_parser("list-designs", help="list built-in designs")
    return parser


def load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None) is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key in ("design", "nt", "k", "qam", "snr_db", "trials", "seed", "decoder", "out", "tol", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    merged = dict(DEFAULTS)
    merged.update(cfg)
    return merged


def _design(cfg) -> ComplexLinearDesign:
    try:
        if cfg.get("design_file"):
            return ComplexLinearDesign.from_json(Path(cfg["design_file"]).read_text())
        return named_design(cfg["design"], cfg["nt"], cfg["k"])
    except (DesignError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


def claimed_class(cfg, design) -> StructureClass | None:
    if cfg.get("claim"):
        return StructureClass(cfg["claim"])
    if cfg.get("design_file"):
        return None
    name = cfg["design"].lower()
    if name == "spatial":
        return StructureClass.UNSTRUCTURED
    if name == "cod" and design.Nt > 2:
        return StructureClass.REDUCED_WSDC
    return StructureClass.REDUCED_ASDC


def cmd_verify(cfg, out=None) -> int:
    out = out or sys.stdout
    design = _design(cfg)
    rng = np.random.default_rng(cfg["seed"])
    report = {"design": design.name or "custom", "Nt": design.Nt, "k": design.k, "T": design.T,
              "rate": str(design.rate)}
    try:
        cset = extract_coefficient_matrices(design)
    except DesignError as exc:
        report["error"] = str(exc)
        print(json.dumps(report, indent=2), file=out)
        return 1
    rc = check_rc_monomial(cset)
    thm = verify_theorem2(cset)
    numeric = classify_design(design, cfg["trials"], cfg["tol"], seed=rng)
    prop = verify_proposition1(design, max(cfg["trials"], 100), cfg["tol"], seed=rng)
    claim = claimed_class(cfg, design)
    matched = numeric.classification == thm.exact_class and (claim is None or claim == thm.exact_class)
    report.update({
        "rc_monomial": rc.rc_monomial,
        "hr_orthogonal": thm.cond1,
        "partition_condition": thm.cond2,
        "partition_condition_strict": thm.cond2_strict,
        "cross_gram_diagonal": thm.cross_gram_diagonal,
        "exact_class": str(thm.exact_class),
        "numerical_class": str(numeric.classification),
        "claimed_class": str(claim) if claim else None,
        "match": matched,
        "tol": cfg["tol"],
        "trials": cfg["trials"],
        "max_offdiag_r11": numeric.max_offdiag11,
        "max_offdiag_r22": numeric.max_offdiag22,
        "proposition1_zero_fraction": prop.fraction,
    })
    text = json.dumps(report, indent=2)
    print(text, file=out)
    if cfg["out"]:
        path = Path(cfg["out"])
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n")
    return 0 if matched else 1


def _write_matrix(path, A, fmt):
    np.savetxt(path, A, delimiter=",", fmt=fmt)


def cmd_inspect(cfg, out=None) -> int:
    out = out or sys.stdout
    design = _design(cfg)
    rng = np.random.default_rng(cfg["seed"])
    Nr = receive_antennas(design)
    ch = sample_channel(design.Nt, Nr, rng)
    M = build_lattice_generator(design, ch).M
    _, R = qr_decompose(M)
    blocks = extract_blocks(R, design.k, cfg["tol"])
    width = max(len(e) for row in design.pattern() for e in row)
    print(f"{design!r}  rate={design.rate}  Nr={Nr}  M: {M.shape[0]}x{M.shape[1]}", file=out)
    print("design:", file=out)
    for row in design.pattern():
        print("  " + "  ".join(e.rjust(width) for e in row), file=out)
    print(f"R zero pattern (. = |entry| < {cfg['tol']:g} ||R||_F), class {blocks.classification}:", file=out)
    h = 2 * design.k
    for i, row in enumerate(blocks.zero_pattern()):
        if i == h:
            print("  " + "-" * (2 * h) + "+" + "-" * (2 * h), file=out)
        print("  " + " ".join(row[:h]) + " | " + " ".join(row[h:]), file=out)
    if cfg["out"]:
        d = Path(cfg["out"])
        d.mkdir(parents=True, exist_ok=True)
        (d / "design.json").write_text(design.to_json(indent=1) + "\n")
        _write_matrix(d / "M.csv", M, "%.17g")
        (d / "R_pattern.txt").write_text("\n".join(blocks.zero_pattern()) + "\n")
        if design.is_monomial:
            cset = extract_coefficient_matrices(design, Nr)
            for i, C in enumerate(cset, start=1):
                _write_matrix(d / f"C_{i:02d}.csv", C, "%d")
        print(f"wrote {d}", file=out)
    return 0


def cmd_simulate(cfg, out=None) -> int:
    out = out or sys.stdout
    design = _design(cfg)
    try:
        config = SimConfig(design=design, qam=cfg["qam"], snr_db=tuple(cfg["snr_db"]), trials=cfg["trials"],
                           master_seed=cfg["seed"], decoder=cfg["decoder"], tol=cfg["tol"], jobs=cfg["jobs"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_sweep(config)
    if cfg["out"]:
        d = Path(cfg["out"])
        d.mkdir(parents=True, exist_ok=True)
        result.to_csv(d / "results.csv")
        result.to_json(d / "results.json")
        print(f"wrote {d / 'results.csv'} and {d / 'results.json'}", file=out)
    else:
        out.write(result.to_csv())
    return 0


def cmd_list_designs(out=None) -> int:
    out = out or sys.stdout
    for name in NAMED_DESIGNS:
        print(f"{name:9s} {DESIGN_NOTES[name]}", file=out)
    return 0


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.command == "list-designs":
        return cmd_list_designs()
    try:
        cfg = load_config(args)
        command = {"verify": cmd_verify, "inspect": cmd_inspect, "simulate": cmd_simulate}[args.command]
        return command(cfg)
    except ConfigError as exc:
        print(f"macstbc: error: {exc}", file=sys.stderr)
        return 2
    except (DecoderRefusal, RankDeficiencyError) as exc:
        print(f"macstbc: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
