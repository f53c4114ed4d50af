"""Command-line front end.

``bootbandit mab CONFIG``, ``bootbandit contextual CONFIG`` and
``bootbandit theory [CONFIG]`` read an INI file, run the experiment and
write CSV traces plus a JSON manifest into the output directory.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
3 a lemma check failed.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dist import RngStream
from .env import DatasetFormatError, DatasetSchemaError, FAMILIES, load_dataset, make_separable_dataset
from .sim import (
    WORKERS_ENV,
    ConfigError,
    ContextualExperiment,
    MABExperiment,
    PolicySpec,
    run_contextual_experiment,
    run_mab_experiment,
)
from .theory import (
    LemmaReport,
    bad_history_probe,
    check_pull_probability,
    check_tail_bound,
    check_truncated_geometric,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_THEORY = 0, 1, 2, 3
CSV_HEADER = "round,policy,mean,stderr"


# ---------------------------------------------------------------------------
# config parsing


def _scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def _int_list(text: str, key: str) -> list[int]:
    """Comma-separated integers and ``a..b`` inclusive ranges."""
    out: list[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        try:
            if ".." in part:
                a, b = part.split("..")
                out.extend(range(int(a), int(b) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {part!r} as an integer or range") from None
    return out


def _float_list(text: str, key: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers") from None


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    return cp


def _get(sec, key, conv, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"{key}: missing required field")
        return default
    try:
        return conv(sec[key])
    except ValueError:
        raise ConfigError(f"{key}: invalid value {sec[key]!r}") from None


def _policies(cp: configparser.ConfigParser, sec) -> list[PolicySpec]:
    names = [n.strip() for n in sec.get("policies", "").split(",") if n.strip()]
    if not names:
        raise ConfigError("policies: at least one policy is required")
    if len(set(names)) != len(names):
        raise ConfigError("policies: duplicate policy names")
    specs = []
    for name in names:
        params = {}
        kind = name
        psec = f"policy.{name}"
        if cp.has_section(psec):
            for k, v in cp[psec].items():
                if k == "kind":
                    kind = v.strip()
                else:
                    params[k] = _scalar(v)
        specs.append(PolicySpec(name, kind, params))
    return specs


def _experiment(cp) -> configparser.SectionProxy:
    if not cp.has_section("experiment"):
        raise ConfigError("experiment: missing [experiment] section")
    return cp["experiment"]


def mab_config(cp: configparser.ConfigParser) -> MABExperiment:
    sec = _experiment(cp)
    family = sec.get("family", "bernoulli").strip()
    if family not in FAMILIES + ("theorem1",):
        raise ConfigError(f"family: unknown family {family!r}; valid: {', '.join(FAMILIES + ('theorem1',))}")
    forced = sec.get("forced_exploration", "none").strip()
    if forced not in ("none", "theorem-text", "proof-derived", "explicit"):
        raise ConfigError(f"forced_exploration: unknown mode {forced!r}")
    cfg = MABExperiment(
        family=family,
        n_arms=_get(sec, "arms", int, 10),
        horizon=_get(sec, "horizon", int, required=True),
        runs=_get(sec, "runs", int, 100),
        master_seed=_get(sec, "seed", int, 0),
        policies=_policies(cp, sec),
        forced=forced,
        forced_m=_get(sec, "forced_m", int),
        realized=_get(sec, "realized", lambda v: bool(_scalar(v)), False),
        block_size=_get(sec, "block_size", int, 100),
        known_arms=_get(sec, "known_arms", lambda v: bool(_scalar(v)), True),
        arm_means=_get(sec, "means", lambda v: tuple(_float_list(v, "means"))),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def contextual_config(cp: configparser.ConfigParser, base: Path) -> ContextualExperiment:
    sec = _experiment(cp)
    seed = _get(sec, "seed", int, 0)
    source = sec.get("dataset", "").strip()
    if not source:
        raise ConfigError("dataset: missing dataset path")
    if source == "synthetic":
        ds = make_separable_dataset(
            _get(sec, "rows", int, 6000),
            _get(sec, "dim", int, 10),
            _get(sec, "classes", int, 3),
            RngStream(seed, (1 << 20,)),
            scale=_get(sec, "scale", float, 3.0),
            noise=_get(sec, "noise", float, 0.5),
        )
    else:
        path = Path(source)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"dataset: file not found: {path}")
        try:
            ds = load_dataset(path, sec.get("format", "dense-csv").strip(), dim=_get(sec, "dim", int))
        except (DatasetFormatError, DatasetSchemaError) as exc:
            raise ConfigError(f"dataset: {exc}") from None
    cfg = ContextualExperiment(
        dataset=ds,
        horizon=_get(sec, "horizon", int, required=True),
        runs=_get(sec, "runs", int, 5),
        master_seed=seed,
        policies=_policies(cp, sec),
        pseudo_sample=_get(sec, "pseudo_sample", int, 1000),
    )
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def traces_csv(series: dict[str, tuple[np.ndarray, np.ndarray]]) -> str:
    """Long-format CSV, one row per (round, policy); values with 10 significant digits."""
    lines = [CSV_HEADER]
    for name, (mean, se) in series.items():
        for t, (m, s) in enumerate(zip(mean.tolist(), se.tolist()), start=1):
            lines.append(f"{t},{name},{m:.10g},{s:.10g}")
    return "\n".join(lines) + "\n"


def _artifact_version() -> str:
    try:
        rev = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(out: Path, cp: configparser.ConfigParser | None, seed, started: float, outputs: list[str]) -> None:
    echo = {s: dict(cp[s]) for s in cp.sections()} if cp is not None else {}
    manifest = {
        "command": sys.argv[1] if len(sys.argv) > 1 else "",
        "config": echo,
        "version": _artifact_version(),
        "master_seed": seed,
        "duration_seconds": round(time.time() - started, 3),
        "outputs": outputs,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_mab(config, out=None, workers: int | None = None) -> int:
    started = time.time()
    cp = read_config(config)
    cfg = mab_config(cp)
    out = Path(out or cp["experiment"].get("out", "results"))
    traces = run_mab_experiment(cfg, workers=workers)
    series = {name: (tr.mean, tr.stderr) for name, tr in traces.items()}
    _atomic_write(out / "regret.csv", traces_csv(series))
    write_manifest(out, cp, cfg.master_seed, started, ["regret.csv"])
    for name, tr in traces.items():
        logger.info("%s: final regret %.4g +- %.2g", name, tr.mean[-1], tr.stderr[-1])
    return EXIT_OK


def cmd_contextual(config, out=None, workers: int | None = None) -> int:
    started = time.time()
    cp = read_config(config)
    cfg = contextual_config(cp, Path(config).resolve().parent)
    out = Path(out or cp["experiment"].get("out", "results"))
    traces = run_contextual_experiment(cfg, workers=workers)
    series = {}
    for name, tr in traces.items():
        avg = tr.running_average()
        series[name] = (avg.mean, avg.stderr)
    _atomic_write(out / "reward.csv", traces_csv(series))
    write_manifest(out, cp, cfg.master_seed, started, ["reward.csv"])
    return EXIT_OK


def theory_reports(cp: configparser.ConfigParser | None, invert_bounds: bool = False) -> tuple[list[LemmaReport], list[str]]:
    """Lemma reports for the grid described by ``cp`` (defaults when ``None``).

    Sections ``[tail_bound]`` (``n``, ``p``, ``k_frac``), ``[pull_probability]``
    (``m``), ``[truncated_geometric]`` (``p``, ``l``) and ``[probe]``
    (``m``, ``horizon``, ``runs``, ``seed``) override the defaults.
    """
    cp = cp if cp is not None else configparser.ConfigParser()

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    tb = sec("tail_bound")
    ns = _int_list(tb.get("n", "5..200"), "tail_bound.n")
    ps = _float_list(tb.get("p", "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5"), "tail_bound.p")
    frac = float(tb.get("k_frac", "0.7"))
    grid = [(n, p, int(np.ceil(frac * n))) for n in ns for p in ps]
    ms = _int_list(sec("pull_probability").get("m", "15..200"), "pull_probability.m")
    tg = sec("truncated_geometric")
    gp = _float_list(tg.get("p", ",".join(f"{0.01 * i:.2f}" for i in range(1, 100))), "truncated_geometric.p")
    gl = _int_list(tg.get("l", "1..100"), "truncated_geometric.l")
    if not grid and not ms and not (gp and gl):
        raise ConfigError("grid: every lemma grid is empty")
    reports = []
    if grid:
        reports.append(check_tail_bound(grid, invert_bounds=invert_bounds))
    if ms:
        reports.append(check_pull_probability(ms, invert_bounds=invert_bounds))
    if gp and gl:
        try:
            reports.extend(check_truncated_geometric(gp, gl, invert_bounds=invert_bounds))
        except ValueError as exc:
            raise ConfigError(f"truncated_geometric: {exc}") from None
    notes = []
    if cp.has_section("probe"):
        pr = cp["probe"]
        res = bad_history_probe(
            int(pr.get("m", "3")),
            int(pr.get("horizon", "2000")),
            int(pr.get("runs", "10000")),
            RngStream(int(pr.get("seed", "0"))),
        )
        notes.append(
            f"# probe m={res.m} T={res.horizon} runs={res.runs}: "
            f"event freq {res.event_freq:.6g} (expected {res.event_expected:.6g}, z={res.event_z():.3g}); "
            f"run length {res.run_length_mean:.6g} +- {res.run_length_se:.3g} "
            f"(predicted {res.run_length_expected:.6g}, z={res.run_length_z():.3g})"
        )
    return reports, notes


def cmd_theory(config=None, out=None, invert_bounds: bool = False) -> int:
    started = time.time()
    cp = read_config(config) if config else None
    reports, notes = theory_reports(cp, invert_bounds=invert_bounds)
    text = "".join(r.to_text() for r in reports) + "".join(n + "\n" for n in notes)
    if out is None and cp is not None and cp.has_section("experiment"):
        out = cp["experiment"].get("out")
    if out is None:
        sys.stdout.write(text)
    else:
        out = Path(out)
        _atomic_write(out / "lemmas.txt", text)
        write_manifest(out, cp, None, started, ["lemmas.txt"])
    for r in reports:
        logger.info("%s: %s", r.lemma, "pass" if r.passed else "FAIL")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_THEORY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bootbandit", description="Bootstrap bandit experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (("mab", "multi-armed regret experiment"), ("contextual", "one-vs-all contextual experiment")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("config")
        p.add_argument("--out", help="output directory (overrides the config's out)")
        p.add_argument("--workers", type=int, help=f"process count (default: ${WORKERS_ENV} or 1)")
    p = sub.add_parser("theory", help="exact lemma checks")
    p.add_argument("config", nargs="?")
    p.add_argument("--out")
    p.add_argument("--invert-bounds", action="store_true", help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "mab":
            return cmd_mab(args.config, args.out, args.workers)
        if args.command == "contextual":
            return cmd_contextual(args.config, args.out, args.workers)
        return cmd_theory(args.config, args.out, args.invert_bounds)
    except ConfigError as exc:
        print(f"bootbandit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"bootbandit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
