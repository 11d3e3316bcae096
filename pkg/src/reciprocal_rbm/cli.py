"""Command-line entry point.

Every run writes its outputs plus a ``manifest.json`` holding the fully
resolved configuration; ``replay <manifest>`` re-runs it from that alone.
Exit status: 0 success, 1 configuration error, 2 data error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import configparser
import glob
import re
import sys
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import report
from .boson import GibbsConfig, constraint_minimum, divergent_modes, landscape_trace, mode_frequencies
from .data import BinaryDataset, ImageSet, binarize, load_idx, synthetic_bars_stripes
from .errors import ConfigError, DataError, NumericalError, ParseError, RbmError
from .partition import AisConfig, ais_log_z, exact_log_z, rais_log_z
from .rbm import ChainState, RbmParams, block_gibbs, load_checkpoint, save_checkpoint
from .spectral import MpLaw, decompose
from .symmetry import (hierarchical_rotation, haar_frame, kurtosis_scan, mean_abs_change, probe_scan,
                       reciprocal_moments, resampling_baseline)
from .training import Strategy, TrainConfig, train

PROG = "reciprocal-rbm"
MANIFEST = "manifest.json"
GLOBAL_KEYS = ("seed", "threads", "out")
PATH_KEYS = ("data", "labels", "checkpoint", "checkpoints")


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


class _Parser(argparse.ArgumentParser):
    """Argument errors become ``ConfigError`` (exit 1) instead of argparse's exit 2."""

    def error(self, message):
        raise ConfigError(f"{self.format_usage()}{self.prog}: error: {message}")


# -- argument groups -------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(0), help="master random seed")
    p.add_argument("--threads", type=int, default=d(1), help="BLAS thread limit")
    p.add_argument("--out", default=d("."), help="output directory")
    p.add_argument("--config", default=d(None), help="key = value config file")


def _checkpoint_flag(p) -> None:
    p.add_argument("--checkpoint", help="model checkpoint (.rbm)")


def _data_flags(p) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", help="IDX image file")
    g.add_argument("--labels", help="IDX label file")
    g.add_argument("--threshold", type=int, default=127, help="binarization threshold")
    g.add_argument("--limit", type=int, default=None, help="use only the first LIMIT items")
    g.add_argument("--synthetic-side", type=int, default=None, help="bars-and-stripes side length")
    g.add_argument("--synthetic-items", type=int, default=1000)
    g.add_argument("--data-seed", type=int, default=0)


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog=PROG, description="Train and analyze binary RBMs in reciprocal space.")
    _global_flags(parser, suppress=False)
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=_Parser)
    table = {}

    def sub(name, help_text):
        p = subs.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        table[name] = p
        return p

    p = sub("train", "train an RBM and write its checkpoint and JSON-lines trace")
    _data_flags(p)
    d = TrainConfig()
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=d.strategy.value)
    p.add_argument("--k-steps", type=int, default=d.k_steps)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--n-chains", type=int, default=d.n_chains)
    p.add_argument("--n-hidden", type=int, default=d.n_hidden)
    p.add_argument("--init-sigma", type=float, default=d.init_sigma)
    p.add_argument("--momentum", type=float, default=d.momentum)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--trace", action="store_true", help="also write a checkpoint after every epoch")

    p = sub("sample", "draw visible samples by block Gibbs sampling")
    _checkpoint_flag(p)
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--k-steps", type=int, default=1000)

    p = sub("estimate-logz", "estimate the log partition function")
    _checkpoint_flag(p)
    p.add_argument("--temps", type=int, default=1000, help="number of annealing transitions")
    p.add_argument("--chains", type=int, default=200)
    p.add_argument("--mode", choices=["ais", "rais", "exact"], default="ais")
    p.add_argument("--burn-in", type=int, default=1000, help="Gibbs sweeps before reverse annealing")

    p = sub("analyze-spectrum", "singular spectrum, saddle table and Marchenko-Pastur reference")
    _checkpoint_flag(p)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--mp-sigma", type=float, default=None, help="weight scale for the reference law (default: RMS of W)")

    p = sub("probe-symmetry", "Jensen divergence between W and randomly rotated copies")
    _checkpoint_flag(p)
    p.add_argument("--rotations-frac", type=float, default=0.1)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--baseline-splits", type=int, default=100)
    p.add_argument("--init-sigma", type=float, default=None, help="scale of the untrained reference model")

    p = sub("rotate-experiment", "reconstructions before and after rotating the left singular vectors")
    _checkpoint_flag(p)
    _data_flags(p)
    p.add_argument("--mode", choices=["identity", "top2_pi", "top5_burst"], default="top2_pi")
    p.add_argument("--n-samples", type=int, default=100)
    p.add_argument("--n-images", type=int, default=4, help="number of per-pixel grids to write")
    p.add_argument("--rotations", type=int, default=10)
    p.add_argument("--protected", type=int, default=5)

    p = sub("kurtosis-scan", "per-mode kurtosis of reciprocal variables of random binary states")
    _checkpoint_flag(p)
    p.add_argument("--haar-visible", type=int, default=None, help="use a Haar frame instead of a checkpoint")
    p.add_argument("--haar-hidden", type=int, default=None)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--no-x", action="store_true", help="skip the visible-side scan")

    p = sub("boson-report", "oscillator frequencies and divergent modes")
    _checkpoint_flag(p)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--k", type=float, default=4.0)

    p = sub("trace-landscape", "per-epoch reciprocal-variable statistics of selected modes")
    p.add_argument("--checkpoints", help="glob matching per-epoch checkpoints")
    _data_flags(p)
    p.add_argument("--modes", default="1,M+1", help="1-based modes; N and M may be used, e.g. 1,M+1")
    p.add_argument("--gibbs-chains", type=int, default=500)
    p.add_argument("--gibbs-steps", type=int, default=100)

    p = sub("replay", "re-run a command from its manifest")
    p.add_argument("manifest")
    return parser, table


# -- config file -------------------------------------------------------------

def _line_of(text: str, key: str) -> Optional[int]:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for n, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return n
    return None


def _convert(action: argparse.Action, raw: str, where: str):
    if isinstance(action, argparse._StoreTrueAction):
        state = configparser.ConfigParser.BOOLEAN_STATES.get(raw.strip().lower())
        if state is None:
            raise ParseError(f"{where}: expected a boolean, got {raw!r}")
        return state
    try:
        value = action.type(raw) if action.type else raw
    except (TypeError, ValueError):
        raise ParseError(f"{where}: cannot parse {raw!r}") from None
    if action.choices is not None and value not in action.choices:
        raise ParseError(f"{where}: {value!r} is not one of {sorted(action.choices)}")
    return value


def config_file(path, command: str, parser: _Parser, sub: _Parser) -> tuple[dict, dict]:
    """Read a ``key = value`` file into (global defaults, command defaults).

    Keys before any section header, or under ``[general]``, apply to every
    command; a ``[<command>]`` section applies to that command only and wins.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__", strict=False)
    try:
        cp.read_string("[general]\n" + text, source=str(path))
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        where = f"{path}:{lineno - 1}" if lineno else str(path)
        raise ParseError(f"{where}: {exc.message.splitlines()[0]}") from None

    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config", argparse.SUPPRESS)}
    global_actions = {a.dest: a for a in parser._actions if a.dest in GLOBAL_KEYS}
    out_global, out_cmd = {}, {}
    for section in ("general", command):
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            dest = key.replace("-", "_")
            line = _line_of(text, key)
            where = f"{path}:{line}: field {key!r}" if line else f"{path}: field {key!r}"
            if dest in global_actions:
                out_global[dest] = _convert(global_actions[dest], raw, where)
            elif dest in actions:
                out_cmd[dest] = _convert(actions[dest], raw, where)
            elif section == command:
                raise ParseError(f"{where}: unknown field for {command}")
    for section in cp.sections():
        if section != "general" and section not in parser_commands(parser):
            raise ParseError(f"{path}: unknown section [{section}]")
    return out_global, out_cmd


def parser_commands(parser: argparse.ArgumentParser) -> list[str]:
    for a in parser._actions:
        if isinstance(a, argparse._SubParsersAction):
            return list(a.choices)
    return []


@dataclass
class RunConfig:
    command: str
    options: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.options["seed"]

    @property
    def out(self) -> Path:
        return Path(self.options["out"])

    def manifest(self, outputs: list[str]) -> dict:
        return {"artifact_version": artifact_version(), "command": self.command, "config": dict(self.options),
                "seed": self.seed, "outputs": sorted(outputs)}


def resolve(argv) -> RunConfig:
    parser, table = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "replay":
        return RunConfig("replay", vars(ns))
    sub = table[ns.command]
    if ns.config:
        g, c = config_file(ns.config, ns.command, parser, sub)
        parser.set_defaults(**g)
        sub.set_defaults(**c)
        ns = parser.parse_args(argv)
    options = {k: v for k, v in sorted(vars(ns).items()) if k != "command"}
    for key in PATH_KEYS:
        if options.get(key):
            options[key] = str(Path(options[key]).expanduser().absolute())
    return RunConfig(ns.command, options)


# -- helpers -----------------------------------------------------------------

def _opts(cfg: RunConfig) -> argparse.Namespace:
    return argparse.Namespace(**cfg.options)


def _require_checkpoint(o) -> tuple[RbmParams, dict]:
    if not o.checkpoint:
        raise ConfigError("--checkpoint is required")
    if not Path(o.checkpoint).is_file():
        raise ConfigError(f"--checkpoint: no such file: {o.checkpoint}")
    return load_checkpoint(o.checkpoint)


def _load_dataset(o) -> tuple[BinaryDataset, tuple[int, int]]:
    if o.data:
        if not Path(o.data).is_file():
            raise ConfigError(f"--data: no such file: {o.data}")
        images = load_idx(o.data)
        if not isinstance(images, ImageSet):
            raise DataError(f"--data: {o.data} holds labels, not images")
        labels = None
        if o.labels:
            if not Path(o.labels).is_file():
                raise ConfigError(f"--labels: no such file: {o.labels}")
            labels = load_idx(o.labels)
        ds = binarize(images, o.threshold, labels)
        shape = (images.rows, images.cols)
    elif o.synthetic_side:
        if o.synthetic_side < 2 or o.synthetic_items < 1:
            raise ConfigError("--synthetic-side must be >= 2 and --synthetic-items >= 1")
        ds = synthetic_bars_stripes(o.synthetic_side, o.synthetic_items, o.data_seed)
        shape = (o.synthetic_side, o.synthetic_side)
    else:
        raise ConfigError("one of --data or --synthetic-side is required")
    if o.limit is not None:
        if o.limit < 1:
            raise ConfigError("--limit must be >= 1")
        ds = ds.subset(np.arange(min(o.limit, ds.n_items)))
    return ds, shape


def _image_shape(n: int) -> tuple[int, int]:
    side = int(round(np.sqrt(n)))
    return (side, side) if side * side == n else (1, n)


def parse_modes(spec: str, n_visible: int, n_hidden: int) -> list[int]:
    """``"1,M+1"`` -> 0-based indices; tokens are integers or N/M with an optional offset."""
    out = []
    for token in filter(None, (t.strip() for t in spec.split(","))):
        m = re.fullmatch(r"(?:(N|M)\s*([+-]\s*\d+)?|(\d+))", token, re.IGNORECASE)
        if not m:
            raise ConfigError(f"--modes: cannot parse {token!r}")
        if m.group(3):
            value = int(m.group(3))
        else:
            base = n_visible if m.group(1).upper() == "N" else n_hidden
            value = base + int((m.group(2) or "0").replace(" ", ""))
        if not 1 <= value <= max(n_visible, n_hidden):
            raise ConfigError(f"--modes: mode {value} outside 1..{max(n_visible, n_hidden)}")
        out.append(value - 1)
    if not out:
        raise ConfigError("--modes: no modes given")
    return out


def _positive(**values) -> None:
    for name, v in values.items():
        if v is None or v < 1:
            raise ConfigError(f"--{name.replace('_', '-')} must be >= 1")


# -- commands ------------------------------------------------------------------

def cmd_train(o, out: Path) -> list[Path]:
    ds, _ = _load_dataset(o)
    try:
        cfg = TrainConfig(strategy=o.strategy, k_steps=o.k_steps, learning_rate=o.learning_rate,
                          batch_size=o.batch_size, epochs=o.epochs, n_chains=o.n_chains, seed=o.seed,
                          init_sigma=o.init_sigma, n_hidden=o.n_hidden, momentum=o.momentum,
                          weight_decay=o.weight_decay)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.n_hidden < 1:
        raise ConfigError("--n-hidden must be >= 1")
    written = []
    callbacks = []
    if o.trace:
        ckdir = out / "checkpoints"
        ckdir.mkdir(parents=True, exist_ok=True)

        def save(epoch, params):
            rel = Path("checkpoints") / f"epoch_{epoch:04d}.rbm"
            save_checkpoint(out / rel, params, {"epoch": epoch, "strategy": cfg.strategy.value, "seed": cfg.seed})
            written.extend([out / rel, out / (str(rel) + ".json")])
            return str(rel)

        callbacks.append(save)
    params, trace = train(cfg, ds, callbacks)
    model = save_checkpoint(out / "model.rbm", params, {"epoch": cfg.epochs, "strategy": cfg.strategy.value,
                                                        "seed": cfg.seed, "config": cfg.as_dict()})
    trace.to_jsonl(out / "trace.jsonl")
    return written + [model, out / "model.rbm.json", out / "trace.jsonl"]


def cmd_sample(o, out: Path) -> list[Path]:
    params, _ = _require_checkpoint(o)
    _positive(n_samples=o.n_samples, k_steps=o.k_steps)
    rng = np.random.default_rng(o.seed)
    init = ChainState((rng.random((o.n_samples, params.n_visible)) < 0.5).astype(np.float64),
                      np.zeros((o.n_samples, params.n_hidden)))
    chains = block_gibbs(params, init, o.k_steps, rng)
    cols = [f"v{i + 1}" for i in range(params.n_visible)]
    return [report.write_csv(out / "samples.csv", chains.v.astype(np.int64), cols)]


def cmd_estimate_logz(o, out: Path) -> list[Path]:
    params, _ = _require_checkpoint(o)
    if o.mode == "exact":
        est = exact_log_z(params)
    else:
        _positive(temps=o.temps, burn_in=o.burn_in)
        try:
            cfg = AisConfig(n_temps=o.temps, n_chains=o.chains, seed=o.seed, rais_burn_in=o.burn_in)
        except ValueError as exc:
            raise ConfigError(f"--chains: {exc}") from None
        est = ais_log_z(params, cfg) if o.mode == "ais" else rais_log_z(params, cfg)
    return [report.write_json(out / "logz.json", est.as_dict())]


def cmd_analyze_spectrum(o, out: Path) -> list[Path]:
    params, _ = _require_checkpoint(o)
    _positive(bins=o.bins)
    frame = decompose(params)
    law = MpLaw(o.mp_sigma, frame.n_visible, frame.n_hidden) if o.mp_sigma else MpLaw.for_frame(frame)
    rep = report.SpectralReport.from_frame(frame, bins=o.bins, law=law)
    mom = reciprocal_moments(frame)
    rep.add("moments", {"mu_x": mom.mu_x[:frame.n_modes], "mu_y": mom.mu_y[:frame.n_modes], "sigma": 0.5})
    return rep.write(out)


def cmd_probe_symmetry(o, out: Path) -> list[Path]:
    params, meta = _require_checkpoint(o)
    _positive(bins=o.bins, repeats=o.repeats, baseline_splits=o.baseline_splits)
    if not 0 < o.rotations_frac:
        raise ConfigError("--rotations-frac must be positive")
    scores = probe_scan(params, o.repeats, o.rotations_frac, o.bins, seed=o.seed)
    base = resampling_baseline(params, o.bins, o.baseline_splits, np.random.default_rng([o.seed, 1]))
    sigma = o.init_sigma if o.init_sigma is not None else meta.get("config", {}).get("init_sigma", 0.01)
    fresh = RbmParams.gaussian_init(params.n_visible, params.n_hidden, sigma, np.random.default_rng([o.seed, 2]))
    untrained = probe_scan(fresh, o.repeats, o.rotations_frac, o.bins, seed=o.seed)
    p99 = float(np.percentile(base, 99))
    payload = {
        "bins": o.bins,
        "rotations_frac": o.rotations_frac,
        "jsd_mean": float(scores.mean()),
        "jsd": scores,
        "resampling_baseline": {"mean": float(base.mean()), "p50": float(np.percentile(base, 50)), "p99": p99},
        "untrained_reference": {"init_sigma": sigma, "jsd_mean": float(untrained.mean())},
        "within_baseline_p99": bool(scores.mean() <= p99),
    }
    rows = [(r + 1, o.seed + 2 * r, s, u) for r, (s, u) in enumerate(zip(scores, untrained))]
    return [report.write_json(out / "symmetry.json", payload),
            report.write_csv(out / "symmetry_scores.csv", rows, ("repeat", "seed", "jsd", "jsd_untrained"))]


def cmd_rotate_experiment(o, out: Path) -> list[Path]:
    params, _ = _require_checkpoint(o)
    ds, shape = _load_dataset(o)
    _positive(n_samples=o.n_samples)
    if ds.dim != params.n_visible:
        raise DataError(f"--data: width {ds.dim} does not match the model's N={params.n_visible}")
    if shape[0] * shape[1] != params.n_visible:
        shape = _image_shape(params.n_visible)
    rng = np.random.default_rng(o.seed)
    mode = "top5_protected_burst" if o.mode == "top5_burst" else o.mode
    samples = ds.bits[: o.n_samples]
    before, after = hierarchical_rotation(params, samples, mode, rng, n_rotations=o.rotations,
                                          n_protected=o.protected)
    written = [report.write_json(out / "rotate.json", {
        "mode": o.mode, "n_samples": int(samples.shape[0]), "image_shape": list(shape),
        "mean_abs_change": mean_abs_change(before, after),
        "per_sample_change": np.abs(after - before).mean(axis=1),
    })]
    for n in range(min(o.n_images, samples.shape[0])):
        written.append(report.write_grid(out / f"before_{n:03d}.csv", before[n].reshape(shape)))
        written.append(report.write_grid(out / f"after_{n:03d}.csv", after[n].reshape(shape)))
    return written


def cmd_kurtosis_scan(o, out: Path) -> list[Path]:
    rng = np.random.default_rng(o.seed)
    if o.haar_visible or o.haar_hidden:
        _positive(haar_visible=o.haar_visible, haar_hidden=o.haar_hidden)
        frame = haar_frame(o.haar_visible, o.haar_hidden, rng)
    else:
        params, _ = _require_checkpoint(o)
        frame = decompose(params)
    if o.samples < 10_000:
        raise ConfigError("--samples must be >= 10000")
    scan = kurtosis_scan(frame, o.samples, rng, include_x=not o.no_x)
    modes = np.flatnonzero(frame.active) + 1
    kx = scan.kurtosis_x if scan.kurtosis_x is not None else np.full(modes.size, np.nan)
    rows = zip(modes, scan.kurtosis_y, kx)
    return [report.write_json(out / "kurtosis.json", scan.summary() | {"n_modes": int(modes.size),
                                                                       "samples": o.samples}),
            report.write_csv(out / "kurtosis_modes.csv", rows, ("mode", "kurtosis_y", "kurtosis_x"))]


def cmd_boson_report(o, out: Path) -> list[Path]:
    params, _ = _require_checkpoint(o)
    if not (o.beta > 0 and o.k > 0):
        raise ConfigError("--beta and --k must be positive")
    frame = decompose(params)
    spec = mode_frequencies(frame, o.beta, o.k)
    div = divergent_modes(spec)
    mu = constraint_minimum(frame)
    payload = spec.as_dict()
    payload["divergent_report"] = {"lambda_c": div["lambda_c"], "modes": [i + 1 for i in div["modes"]],
                                   "lambdas": div["lambdas"], "n_divergent": div["n_divergent"]}
    payload["constraint_minimum"] = {"x": mu.x, "y": mu.y, "u": mu.u, "w": mu.w}
    return [report.write_json(out / "boson.json", payload)]


def cmd_trace_landscape(o, out: Path) -> list[Path]:
    if not o.checkpoints:
        raise ConfigError("--checkpoints is required")
    paths = sorted(glob.glob(o.checkpoints))
    paths = [p for p in paths if not p.endswith(".json")]
    if not paths:
        raise ConfigError(f"--checkpoints: no files match {o.checkpoints}")
    loaded = []
    for n, p in enumerate(paths):
        params, meta = load_checkpoint(p)
        loaded.append((int(meta.get("epoch", n)), params))
    loaded.sort(key=lambda t: t[0])
    ds, _ = _load_dataset(o)
    _positive(gibbs_steps=o.gibbs_steps)
    if o.gibbs_chains < 2:
        raise ConfigError("--gibbs-chains must be >= 2")
    first = loaded[0][1]
    modes = parse_modes(o.modes, first.n_visible, first.n_hidden)
    trace = landscape_trace(loaded, ds, GibbsConfig(o.gibbs_chains, o.gibbs_steps, o.seed), modes)
    path = out / "landscape.csv"
    path.write_text(trace.to_csv())
    return [path]


COMMANDS = {
    "train": cmd_train,
    "sample": cmd_sample,
    "estimate-logz": cmd_estimate_logz,
    "analyze-spectrum": cmd_analyze_spectrum,
    "probe-symmetry": cmd_probe_symmetry,
    "rotate-experiment": cmd_rotate_experiment,
    "kurtosis-scan": cmd_kurtosis_scan,
    "boson-report": cmd_boson_report,
    "trace-landscape": cmd_trace_landscape,
}


def run(cfg: RunConfig) -> list[Path]:
    out = cfg.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: cannot create {out}: {exc.strerror}") from None
    o = _opts(cfg)
    threads = cfg.options.get("threads", 1)
    if threads is None or threads < 1:
        raise ConfigError("--threads must be >= 1")
    with threadpool_limits(limits=threads):
        written = COMMANDS[cfg.command](o, out)
    rel = [str(Path(p).relative_to(out)) for p in written]
    report.write_json(out / MANIFEST, cfg.manifest(rel))
    return written


def replay(manifest_path, out=None) -> list[Path]:
    path = Path(manifest_path)
    if not path.is_file():
        raise ConfigError(f"manifest: no such file: {path}")
    try:
        manifest = report.load_json(path)
        command = manifest["command"]
        options = dict(manifest["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: not a run manifest ({exc})") from None
    if command not in COMMANDS:
        raise ParseError(f"{path}: unknown command {command!r}")
    options["out"] = str(out) if out is not None else str(path.parent / "replay")
    return run(RunConfig(command, options))


def parse_and_dispatch(argv=None) -> int:
    cfg = resolve(sys.argv[1:] if argv is None else list(argv))
    if cfg.command == "replay":
        args = sys.argv[1:] if argv is None else list(argv)
        given = any(a == "--out" or a.startswith("--out=") for a in args)
        replay(cfg.options["manifest"], cfg.options["out"] if given else None)
    else:
        run(cfg)
    return 0


def main(argv=None) -> int:
    try:
        return parse_and_dispatch(argv)
    except ConfigError as exc:
        code, msg = 1, str(exc)
    except DataError as exc:
        code, msg = 2, str(exc)
    except NumericalError as exc:
        code, msg = 3, str(exc)
    except RbmError as exc:
        code, msg = 1, str(exc)
    except OSError as exc:
        code, msg = 2, f"{exc.filename or ''}: {exc.strerror or exc}"
    print(f"{PROG}: error: {msg}" if not msg.startswith("usage") else msg, file=sys.stderr)
    return code
