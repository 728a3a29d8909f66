"""Command line driver: ``oscifd plan | run | converge | conserve | defect``.

Configuration is a TOML file with the blocks ``[physics]``,
``[discretization]``, ``[scheme]``, ``[reference]`` and ``[output]``; unknown
keys are errors. Tables are written as CSV with 17 significant digits.

Exit codes: 0 success, 1 solver or configuration error, 2 stability
rejection, 3 blow-up detected.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import types
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core import PhysicalSetup, envelope_from_dict, sample_initial_data
from .errors import OscifdError, StabilityViolation
from .experiments import (MeshRule, conservation_rows, convergence_row, defect_row,
                          fit_rows, realise_mesh)
from .planner import one_step_form
from .schemes import CnConfig, run

log = logging.getLogger("oscifd")

EXIT_OK, EXIT_ERROR, EXIT_REJECTED, EXIT_BLOWUP = 0, 1, 2, 3

_KEYS = {
    "physics": {"epsilon", "kappa", "lambda", "domain", "final_time", "envelope"},
    "discretization": {"mode", "h", "tau", "tau_over_h", "tau_over_h2", "rho",
                       "alpha_branch", "beta_branch", "theta_max", "target_M", "grid",
                       "h_list"},
    "scheme": {"name", "fixed_point_tol", "max_iterations", "predictor", "form",
               "bootstrap", "blowup_factor"},
    "reference": {"enabled", "m_ref", "m_ref_multiplier", "tau_ref"},
    "output": {"path", "stride"},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    setup: PhysicalSetup
    rule: MeshRule
    h: Optional[float]
    target_M: Optional[int]
    h_list: List[float]
    schemes: List[str]
    cn: CnConfig
    bootstrap: str
    blowup_factor: float
    reference: Optional[Dict]
    output_path: Optional[str]
    stride: int


def _check_keys(doc: Dict):
    unknown_blocks = set(doc) - set(_KEYS)
    if unknown_blocks:
        raise ConfigError(f"unknown config blocks: {sorted(unknown_blocks)}")
    for block, allowed in _KEYS.items():
        extra = set(doc.get(block, {})) - allowed
        if extra:
            raise ConfigError(f"unknown keys in [{block}]: {sorted(extra)}")


def parse_config(doc: Dict) -> ExperimentConfig:
    _check_keys(doc)
    ph = doc.get("physics")
    if ph is None:
        raise ConfigError("missing [physics] block")
    try:
        left, right = ph.get("domain", [-4.0, 4.0])
        envelope = envelope_from_dict(ph.get("envelope", {"kind": "gaussian"}))
        setup = PhysicalSetup(epsilon=float(ph["epsilon"]), kappa=float(ph.get("kappa", 1.0)),
                              lam=float(ph.get("lambda", 1.0)), domain_left=float(left),
                              domain_right=float(right),
                              final_time=float(ph.get("final_time", 1.0)),
                              envelope=envelope)
    except KeyError as exc:
        raise ConfigError(f"missing physics key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [physics] block: {exc}") from None

    dz = dict(doc.get("discretization", {}))
    mode = dz.pop("mode", None)
    planner_keys = {"rho", "alpha_branch", "beta_branch", "theta_max", "target_M", "grid"}
    if mode is None:
        mode = "planner" if planner_keys & set(dz) else "direct"
    if mode == "direct" and planner_keys & set(dz):
        raise ConfigError("direct mode does not accept planner keys "
                          f"{sorted(planner_keys & set(dz))}")
    if mode == "planner" and "tau" in dz:
        raise ConfigError("planner mode determines tau; remove 'tau'")
    branch = dz.get("alpha_branch", 1)
    try:
        rule = MeshRule(mode=mode, tau=dz.get("tau"), tau_over_h=dz.get("tau_over_h"),
                        tau_over_h2=dz.get("tau_over_h2"), rho=float(dz.get("rho", 4.0)),
                        alpha_branch=None if branch == "auto" else int(branch),
                        beta_branch=int(dz.get("beta_branch", 1)),
                        theta_max=float(dz.get("theta_max", 0.95)),
                        grid=dz.get("grid", "stretch"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad [discretization] block: {exc}") from None

    sc = doc.get("scheme", {})
    name = sc.get("name", "crank_nicolson")
    if name not in ("leapfrog", "crank_nicolson", "both"):
        raise ConfigError(f"unknown scheme {name!r}")
    schemes = ["leapfrog", "crank_nicolson"] if name == "both" else [name]
    try:
        cn = CnConfig(fixed_point_tol=float(sc.get("fixed_point_tol", 1e-14)),
                      max_iterations=int(sc.get("max_iterations", 100)),
                      predictor=sc.get("predictor", "copy_prev"),
                      form=sc.get("form", "two_step"))
    except ValueError as exc:
        raise ConfigError(f"bad [scheme] block: {exc}") from None
    bootstrap = sc.get("bootstrap", "cn_half")
    if bootstrap not in ("cn_half", "dominant_term", "auto"):
        raise ConfigError(f"unknown bootstrap {bootstrap!r}")

    ref = doc.get("reference", {})
    reference = None
    if ref.get("enabled", False):
        reference = {k: v for k, v in ref.items() if k != "enabled"}

    out = doc.get("output", {})
    stride = int(out.get("stride", 1))
    if stride < 1:
        raise ConfigError("output stride must be positive")
    return ExperimentConfig(setup=setup, rule=rule, h=dz.get("h"), target_M=dz.get("target_M"),
                            h_list=[float(x) for x in dz.get("h_list", [])], schemes=schemes,
                            cn=cn, bootstrap=bootstrap,
                            blowup_factor=float(sc.get("blowup_factor", 1e6)),
                            reference=reference, output_path=out.get("path"), stride=stride)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from None
    return parse_config(doc)


# --------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def to_csv(columns: List[str], rows: List[Dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _workers() -> int:
    raw = os.environ.get("OSCIFD_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring OSCIFD_THREADS=%r", raw)
    return os.cpu_count() or 1


def _sweep(fn, items) -> List:
    """Run fn over items concurrently; results keep the input order."""
    if not items:
        return []
    with ThreadPoolExecutor(max_workers=min(_workers(), len(items))) as pool:
        return list(pool.map(fn, items))


def _mesh_points(cfg: ExperimentConfig, h_list: Optional[List[float]]):
    if h_list is not None:
        return [(h, None) for h in h_list]
    if cfg.h_list:
        return [(h, None) for h in cfg.h_list]
    if cfg.h is not None or cfg.target_M is not None:
        return [(cfg.h, cfg.target_M)]
    return []


# --------------------------------------------------------------------------
# commands


def _single_point(cfg: ExperimentConfig):
    """Mesh for plan/run/conserve: h or target_M, else the first h_list entry."""
    if cfg.h is None and cfg.target_M is None and cfg.h_list:
        return cfg.h_list[0], None
    return cfg.h, cfg.target_M


def cmd_plan(cfg: ExperimentConfig, out) -> int:
    code = EXIT_OK
    points = _mesh_points(cfg, None) or [(None, None)]
    for scheme, (h, target_M) in [(s, p) for s in cfg.schemes for p in points]:
        try:
            pr = realise_mesh(cfg.setup, h, cfg.rule, scheme, target_M=target_M,
                              raise_on_reject=True)
        except StabilityViolation as exc:
            pr = exc.result
            code = EXIT_REJECTED
        d, st = pr.disc, pr.stability
        f = d.filters
        lines = [f"scheme          {scheme}",
                 f"mode            {pr.mode}",
                 f"alpha           {d.alpha:.17g}",
                 f"beta            {d.beta:.17g}",
                 f"tau             {d.tau:.17g}",
                 f"h               {d.h:.17g}",
                 f"M               {d.M}",
                 f"N               {d.N}",
                 f"domain          [{pr.setup.domain_left:.17g}, {pr.setup.domain_right:.17g}]",
                 f"final_time      {pr.setup.final_time:.17g}",
                 f"sinc(alpha)     {f.sinc_alpha:.17g}",
                 f"tanc(alpha)     {f.tanc_alpha:.17g}",
                 f"phi(beta)       {f.phi_beta:.17g}",
                 f"psi(beta)       {f.psi_beta:.17g}"]
        if pr.mode == "direct":
            lines.append("consistency     not imposed (direct mode)")
        else:
            lines += [f"rho_eff         {d.rho_eff:.17g}",
                      f"residual_alpha  {pr.residual_alpha:.3e}",
                      f"residual_beta   {pr.residual_beta:.3e}"]
        lines += [f"mu_max          {st.mu_max:.17g}",
                  f"bound_value     {st.bound_value:.17g}",
                  f"accepted        {'yes' if pr.accepted else 'no'}"]
        lines += [f"note            {n}" for n in pr.notes]
        out.write("\n".join(lines) + "\n\n")
    return code


def cmd_run(cfg: ExperimentConfig, out) -> int:
    code = EXIT_OK
    rows = []
    for scheme in cfg.schemes:
        h, target_M = _single_point(cfg)
        pr = realise_mesh(cfg.setup, h, cfg.rule, scheme, target_M=target_M)
        if cfg.rule.mode == "planner" and not pr.accepted:
            log.warning("%s plan not accepted (bound %.4g); running anyway", scheme,
                        pr.stability.bound_value)
        setup, disc = pr.setup, pr.disc
        if scheme == "crank_nicolson" and cfg.cn.form == "one_step":
            setup, disc = one_step_form(setup, disc)
        u0 = sample_initial_data(setup, disc)
        res = run(scheme, u0, setup, disc, cfg.cn, bootstrap_method=cfg.bootstrap,
                  blowup_factor=cfg.blowup_factor)
        if res.blew_up:
            log.error("%s blew up at step %d (t = %.6g): %s", scheme, res.blowup_step,
                      res.blowup_time, res.message)
            code = EXIT_BLOWUP
        for j, v in enumerate(res.final.values):
            rows.append(dict(scheme=scheme, t=res.final.time, x=setup.domain_left + j * disc.h,
                             re=float(v.real), im=float(v.imag), abs=float(abs(v))))
    _emit(to_csv(["scheme", "t", "x", "re", "im", "abs"], rows), cfg.output_path)
    return code


def cmd_converge(cfg: ExperimentConfig, h_list, out) -> int:
    points = _mesh_points(cfg, h_list)
    columns = ["scheme", "h", "tau", "M", "N", "err_vs_reference", "err_vs_dominant_term",
               "error"]
    jobs = [(s, h, m) for s in cfg.schemes for (h, m) in points]
    rows = _sweep(lambda j: convergence_row(j[0], cfg.setup, j[1], cfg.rule, cfg.cn,
                                            cfg.bootstrap, cfg.reference, cfg.blowup_factor,
                                            target_M=j[2]), jobs)
    body = list(rows)
    if len(points) >= 3:
        for s in cfg.schemes:
            mine = [r for r in rows if r["scheme"] == s]
            body.append(dict(scheme=f"fitted_order:{s}",
                             err_vs_reference=fit_rows(mine, "err_vs_reference"),
                             err_vs_dominant_term=fit_rows(mine, "err_vs_dominant_term")))
    _emit(to_csv(columns, body), cfg.output_path)
    if any(r["error"].startswith("blow-up") for r in rows):
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_conserve(cfg: ExperimentConfig, out) -> int:
    columns = ["scheme", "t", "mass", "energy", "rel_mass_drift", "rel_energy_drift",
               "weighted_mass", "weighted_energy", "event"]
    body = []
    code = EXIT_OK
    for scheme in cfg.schemes:
        h, target_M = _single_point(cfg)
        pr = realise_mesh(cfg.setup, h, cfg.rule, scheme, target_M=target_M)
        rows, res = conservation_rows(scheme, pr.setup, pr.disc, cfg.cn, cfg.stride,
                                      cfg.bootstrap, cfg.blowup_factor)
        for r in rows:
            r["scheme"] = scheme
        body += rows
        if res.blew_up:
            code = EXIT_BLOWUP
    _emit(to_csv(columns, body), cfg.output_path)
    return code


def cmd_defect(cfg: ExperimentConfig, h_list, out) -> int:
    if cfg.rule.mode != "planner":
        raise ConfigError("defect needs planner mode (consistent meshes)")
    points = _mesh_points(cfg, h_list)
    columns = ["scheme", "tau", "h", "defect_max", "defect_wiener", "floor_max",
               "reduced_max", "reduced_wiener", "error"]
    jobs = [(s, h, m) for s in cfg.schemes for (h, m) in points]
    rows = _sweep(lambda j: defect_row(j[0], cfg.setup, j[1], cfg.rule, target_M=j[2]), jobs)
    _emit(to_csv(columns, rows), cfg.output_path)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors map to exit code 1; 2 is reserved for stability rejection
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oscifd", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("plan", "solve the consistency relation and report the mesh"),
                           ("run", "run the configured scheme(s); CSV of the final state"),
                           ("converge", "error versus h table with fitted order"),
                           ("conserve", "mass and energy along a run"),
                           ("defect", "defect of the dominant term on planned meshes")]:
        sp = sub.add_parser(name, help=helptext)
        sp.error = types.MethodType(_Parser.error, sp)
        sp.add_argument("--config", required=True, help="TOML experiment file")
        sp.add_argument("--output", help="CSV path (default: the config's output.path or stdout)")
        sp.add_argument("--quiet", action="store_true", help="only errors on stderr")
        if name in ("converge", "defect"):
            sp.add_argument("--h-list", help="comma separated mesh widths, e.g. 0.4,0.2,0.1")
    return p


def _parse_h_list(text: Optional[str]):
    if text is None:
        return None
    if not text.strip():
        return []
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --h-list {text!r}") from None


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="oscifd: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        if args.output:
            cfg.output_path = args.output
        out = sys.stdout
        if args.command == "plan":
            return cmd_plan(cfg, out)
        if args.command == "run":
            return cmd_run(cfg, out)
        if args.command == "converge":
            return cmd_converge(cfg, _parse_h_list(args.h_list), out)
        if args.command == "conserve":
            return cmd_conserve(cfg, out)
        return cmd_defect(cfg, _parse_h_list(args.h_list), out)
    except StabilityViolation as exc:
        log.error("%s", exc)
        return EXIT_REJECTED
    except (OscifdError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
