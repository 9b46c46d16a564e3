"""Command-line front end.

    hybrident simulate  [--config F] [--seed N] [--out DIR] [--cutoff-a N] [--cutoff-b N]
    hybrident wigner    ...  block Wigner grids, number and rotated bases
    hybrident sweep     ...  negativity versus router transmissivity
    hybrident tomo      ...  sample -> reconstruct -> compare
    hybrident reproduce ...  headline numbers against the reference values

Exit codes: 0 success, 2 a numeric check failed, 1 operational error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import logging
import re
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .analysis import block_grids, max_target_fidelity, negativity, report_metrics, wigner_origin
from .fock import state_fidelity, truncate
from .protocol import ExperimentConfig, reduced_block, run_protocol, sweep_router
from .states import HybridTargetSpec, coherent
from .tomography import MLEOptions, TomographySchedule, mle_reconstruct, sample

log = logging.getLogger("hybrident")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

_SECTIONS = {
    "source": ["lam", "squeeze_db", "tap_r", "router_t", "phi", "herald", "cond_eff", "visibility"],
    "efficiency": ["eta_a", "eta_b", "eta_hom", "eta_includes_homodyne", "escape"],
    "numerics": ["cutoff_a", "cutoff_b", "cutoff_idler", "cutoff_tap", "seed"],
}
_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


class ConfigError(ValueError):
    pass


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    low = raw.lower()
    try:
        if key == "router_t":
            return None if low in ("balanced", "none", "") else float(raw)
        if key == "escape":
            if low in ("none", ""):
                return None
            t, l = (float(v) for v in raw.split(","))
            return (t, l)
        if key == "herald":
            return raw
        if key == "eta_includes_homodyne":
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if key in ("cutoff_a", "cutoff_b", "cutoff_idler", "cutoff_tap", "seed"):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None


def _format_value(key: str, v) -> str:
    if key == "router_t":
        return "balanced" if v is None else _fmt(v)
    if key == "escape":
        return "none" if v is None else f"{_fmt(v[0])}, {_fmt(v[1])}"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return i
    return None


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse INI-style text; keys may sit in any section (or before the first)."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str  # keep key case so typos are reported verbatim
    try:
        cp.read_string("[__top__]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"line {exc.lineno - 1}: duplicate key {exc.option!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno - 1}: duplicate section {exc.section!r}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"line {lineno - 1}: cannot parse {line.strip()!r}") from None

    values: dict = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            where = _line_of(text, key)
            loc = f"line {where}: " if where else ""
            if key not in _FIELDS:
                raise ConfigError(f"{loc}unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{loc}key {key!r} given twice")
            try:
                values[key] = _parse_value(key, raw)
            except ConfigError as exc:
                raise ConfigError(f"{loc}{exc}") from None
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        return parse_config_text(path.read_text())
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def emit_config(cfg: ExperimentConfig) -> str:
    """Serialize every field; ``parse_config_text(emit_config(c)) == c``."""
    lines = []
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {_format_value(k, getattr(cfg, k))}" for k in keys]
        lines.append("")
    return "\n".join(lines)


@dataclass
class RunManifest:
    config: dict
    version: str
    seed: int
    command: str
    started: float
    finished: float = 0.0
    outputs: dict = field(default_factory=dict)

    def add(self, path: Path, data: bytes | str) -> None:
        if isinstance(data, str):
            data = data.encode()
        path.write_bytes(data)
        self.outputs[path.name] = hashlib.sha256(data).hexdigest()

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    def verify(self, out: Path) -> bool:
        """True when every listed file still has its recorded digest."""
        return all(
            (out / name).exists() and hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
            for name, digest in self.outputs.items()
        )


def _json(obj) -> str:
    def clean(v):
        if isinstance(v, dict):
            return {str(k): clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.floating, float)):
            return float(_fmt(v))
        if isinstance(v, np.integer):
            return int(v)
        return v

    return json.dumps(clean(obj), indent=2, sort_keys=True)


def _target(cfg: ExperimentConfig) -> HybridTargetSpec:
    return HybridTargetSpec(0.9, cfg.phi)


def cmd_simulate(cfg: ExperimentConfig, args, man: RunManifest) -> int:
    res = run_protocol(cfg)
    target = _target(cfg)
    payload = {
        "router_t": res.router_t,
        "p_herald": res.p_herald,
        "diagnostics": res.diagnostics,
        "target": {"alpha": target.alpha, "phi": target.phi},
        "corrected": report_metrics(res.rho_ab, target).to_dict(),
        "uncorrected": report_metrics(res.rho_uncorrected, target).to_dict(),
    }
    text = _json(payload)
    man.add(args.out / "simulate.json", text)
    print(text)
    return EXIT_OK


def cmd_wigner(cfg: ExperimentConfig, args, man: RunManifest) -> int:
    res = run_protocol(cfg)
    rho = res.rho_uncorrected if args.uncorrected else res.rho_ab
    x = np.linspace(-args.extent, args.extent, args.points)
    for basis in ("number", "rotated"):
        for (k, l), grid in block_grids(rho, x, x, basis).items():
            name = f"wigner_{basis}_{'p' if k == '+' else 'm' if k == '-' else k}" \
                   f"{'p' if l == '+' else 'm' if l == '-' else l}.csv"
            man.add(args.out / name, grid.to_csv())
    print(f"wrote {len(man.outputs)} grids to {args.out}")
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, args, man: RunManifest) -> int:
    ts = np.linspace(0.0, 1.0, args.points)
    pts = sweep_router(cfg, ts, workers=args.workers)
    lines = ["router_t,negativity,p_herald"]
    lines += [f"{_fmt(p.router_t)},{_fmt(p.negativity)},{_fmt(p.p_herald)}" for p in pts]
    text = "\n".join(lines) + "\n"
    man.add(args.out / "sweep.csv", text)
    print(text, end="")
    return EXIT_OK


def cmd_tomo(cfg: ExperimentConfig, args, man: RunManifest) -> int:
    res = run_protocol(cfg)
    dims = (args.tomo_dim_a, args.tomo_dim_b)
    schedule = TomographySchedule(n_total=args.samples)
    records = sample(res.rho_ab, schedule, cfg.eta_hom, seed=cfg.seed)
    est = mle_reconstruct(records, dims, cfg.eta_hom, MLEOptions(max_iter=args.max_iter))
    truth = truncate(res.rho_ab, dims).normalized()
    summary = {
        "dims": list(dims),
        "samples": len(records),
        "iterations": est.iterations,
        "converged": est.converged,
        "informationally_complete": est.informationally_complete,
        "log_likelihood": est.log_likelihood,
        "fidelity_with_truth": state_fidelity(est.rho, truth),
        "negativity_truth": negativity(truth),
        "negativity_estimate": negativity(est.rho),
    }
    man.add(args.out / "records.csv", records.to_csv())
    man.add(args.out / "reconstruction.json", est.to_json())
    man.add(args.out / "tomo.json", _json(summary))
    print(_json(summary))
    return EXIT_OK


@dataclass(frozen=True)
class Row:
    quantity: str
    reference: float
    value: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(abs(self.value - self.reference) <= self.tol)


def reproduce_rows(cfg: ExperimentConfig) -> list[Row]:
    res = run_protocol(cfg)
    lossless = run_protocol(replace(cfg, eta_a=1.0, eta_b=1.0, eta_hom=1.0))
    w0 = wigner_origin(reduced_block(res.rho_uncorrected, 0, 0), normalize=True)
    overlap = abs(np.vdot(coherent(1.0, 40).amps, coherent(-1.0, 40).amps)) ** 2
    return [
        Row("N_corr", 0.37, negativity(res.rho_ab), 0.04),
        Row("N_uncorr", 0.26, negativity(res.rho_uncorrected), 0.04),
        Row("F_target", 0.77, report_metrics(res.rho_ab, _target(cfg)).fidelity, 0.05),
        Row("W0", -0.14, float(np.real(w0)), 0.03),
        Row("F_max", 0.94, max_target_fidelity(lossless.rho_ab)[1], 0.02),
        Row("overlap(alpha=1)", float(np.exp(-4)), float(overlap), 1e-6),
    ]


def lambda_sensitivity(cfg: ExperimentConfig, lams=(0.05, 0.1, 0.2)) -> list[dict]:
    out = []
    for lam in lams:
        res = run_protocol(replace(cfg, lam=lam))
        out.append({
            "lam": lam,
            "router_t": res.router_t,
            "N_corr": negativity(res.rho_ab),
            "N_uncorr": negativity(res.rho_uncorrected),
            "W0_uncorr": float(np.real(wigner_origin(reduced_block(res.rho_uncorrected, 0, 0), normalize=True))),
        })
    return out


def cmd_reproduce(cfg: ExperimentConfig, args, man: RunManifest) -> int:
    rows = reproduce_rows(cfg)
    head = f"{'quantity':<18}{'reference':>12}{'simulated':>12}{'tolerance':>12}  result"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.quantity:<18}{r.reference:>12.6g}{r.value:>12.6g}{r.tol:>12.3g}  {'PASS' if r.ok else 'FAIL'}")
    lines += ["", "lambda sensitivity", f"{'lam':>6}{'router_t':>10}{'N_corr':>10}{'N_uncorr':>10}{'W0_uncorr':>11}"]
    sens = lambda_sensitivity(cfg)
    for s in sens:
        lines.append(f"{s['lam']:>6.3g}{s['router_t']:>10.4f}{s['N_corr']:>10.4f}{s['N_uncorr']:>10.4f}{s['W0_uncorr']:>11.4f}")
    text = "\n".join(lines) + "\n"
    man.add(args.out / "reproduce.txt", text)
    man.add(args.out / "reproduce.json", _json({
        "rows": [dict(dataclasses.asdict(r), ok=r.ok) for r in rows],
        "lambda_sensitivity": sens,
    }))
    print(text, end="")
    return EXIT_OK if all(r.ok for r in rows) else EXIT_FAIL


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "wigner": cmd_wigner,
    "sweep": cmd_sweep,
    "tomo": cmd_tomo,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with ExperimentConfig keys")
    common.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--cutoff-a", type=int, help="Fock cutoff of the discrete mode")
    common.add_argument("--cutoff-b", type=int, help="Fock cutoff of the cat mode")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hybrident", description="Hybrid DV/CV entanglement simulator")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="herald once and report metrics")
    w = sub.add_parser("wigner", parents=[common], help="Wigner grids of all reduced blocks")
    w.add_argument("--extent", type=float, default=4.0)
    w.add_argument("--points", type=int, default=81)
    w.add_argument("--uncorrected", action="store_true", help="include homodyne inefficiency")
    s = sub.add_parser("sweep", parents=[common], help="negativity versus router transmissivity")
    s.add_argument("--points", type=int, default=21)
    s.add_argument("--workers", type=int, default=1)
    t = sub.add_parser("tomo", parents=[common], help="homodyne tomography round trip")
    t.add_argument("--samples", type=int, default=200_000)
    t.add_argument("--tomo-dim-a", type=int, default=3)
    t.add_argument("--tomo-dim-b", type=int, default=10)
    t.add_argument("--max-iter", type=int, default=500)
    sub.add_parser("reproduce", parents=[common], help="compare headline numbers with reference values")
    return p


def load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.cutoff_a is not None:
        over["cutoff_a"] = args.cutoff_a
    if args.cutoff_b is not None:
        over["cutoff_b"] = args.cutoff_b
    return replace(cfg, **over) if over else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        man = RunManifest(cfg.to_dict(), __version__, cfg.seed, args.command, time.time())
        man.add(args.out / "config.ini", emit_config(cfg))
        code = COMMANDS[args.command](cfg, args, man)
        man.finished = time.time()
        (args.out / "manifest.json").write_text(man.to_json())
        return code
    except Exception as exc:  # operational failure: report with context, exit 1
        print(f"hybrident {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
