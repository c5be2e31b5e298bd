"""Command-line front end.

Every command resolves a flat JSON config (built-in defaults, then
``--config`` file, then explicit flags), writes its outputs atomically under
``--out-dir`` and exits with 1 for configuration errors, 2 for I/O errors and
3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import InsufficientDecayError, RieszSettings, harmonic_probe, riesz_analyze, spectral_bias_probe
from .atoms import ATOM_IDS, Atom, make_atom
from .encoders import HashGridEncoder, IdentityEncoder, fourier_gaussian, fourier_logspaced
from .init import ArchSpec, InitScheme, init_model
from .meta import BumpFamily, MetaConfig, adapt, meta_fit
from .miner import miner_eval, miner_fit
from .mire import mire_select
from .model import NonFiniteError, forward_batch
from .modelfile import ModelFileError, load_model, save_model
from .objectives import ForwardOperator, Objective, Regularizer, SampledSignal, loss_mse
from .reparam import ReparamModel
from .rng import Rng
from .signal_io import (
    AudioClip,
    FormatError,
    ImageGrid,
    atomic_write_bytes,
    encode_pnm,
    encode_wav,
    lattice_coords,
    load_pgm_ppm,
    load_wav,
    psnr,
    to_samples,
)
from .spectra import Candidate, fresh_select
from .train import DivergenceError, TrainConfig, fit

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 1, 2, 3


class ConfigError(ValueError):
    """Invalid command configuration."""


# --- config plumbing ------------------------------------------------------------

COMMON = {"seed": 0, "out_dir": "out"}

NET = {
    "atom": "sine",
    "atom_params": {},
    "w0": None,
    "scheme": "auto",
    "bias_range": 1.0,
    "hidden": [64, 64, 64],
}

ENCODING = {
    "encoding": "identity",
    "ff_features": 64,
    "sigma": 10.0,
    "octaves": 6,
    "hash_levels": 8,
    "hash_base": 4,
    "hash_growth": 1.5,
    "hash_table": 4096,
    "hash_features": 2,
}

DEFAULTS: dict[str, dict] = {
    "fit": {
        "signal": None, **ENCODING, **NET,
        "steps": 2000, "lr": None, "batch_size": None, "psnr_every": 50,
        "fidelity": "value", "operator": {"op": "identity"}, "regularizers": [], "reparam": False,
    },
    "eval": {"model": None, "width": None, "height": None, "length": None, "coords": None, "rate": None},
    "pyramid-fit": {
        "signal": None, "levels": 3, "patch": 16, "tau": 1e-4, "atom": "sine", "atom_params": {},
        "w0": None, "scheme": "auto", "bias_range": 1.0, "hidden": [32, 32],
        "coarse_hidden": None, "steps": 200, "coarse_steps": 500, "lr": None,
    },
    "mire-select": {
        "signal": None, "dictionary": ["relu", "sine", "gaussian", "sinc"], "depth": 3, "width": 32,
        "trial_steps": 300, "final_steps": 2000, "lr": 1e-3,
    },
    "fresh-select": {
        "signal": None,
        "candidates": [
            {"name": f"siren-w0-{w:g}", "atom": "sine", "scheme": "siren", "w0": w} for w in (10.0, 30.0, 60.0, 90.0)
        ],
        "w0_grid": None, "sigma_grid": None, "hidden": [64, 64, 64],
    },
    "meta-fit": {
        "n_points": 64, "bump_width": 0.25, "spread": 0.5, "atom": "sine", "atom_params": {},
        "w0": 1.0, "scheme": "standard", "bias_range": 1.0, "hidden": [32, 32],
        "inner_steps": 3, "inner_lr": 1e-3, "outer_lr": 1e-3, "tasks_per_batch": 8,
        "outer_steps": 1000, "eval_tasks": 16,
    },
    "analyze-riesz": {
        "atom": "sinc", "atom_params": {}, "window": 32.0, "density": 8, "k_translates": 64,
        "tolerance": 1e-3, "max_window": 65536.0,
    },
    "probe-spectral-bias": {
        "atom": "relu", "atom_params": {}, "w0": None, "scheme": "auto", "bias_range": 1.0,
        "hidden": [64, 64, 64], "f_lo": 1, "f_hi": 32, "n": 512, "steps": 5000, "every": 10, "lr": None,
    },
    "probe-harmonics": {"alpha": [0.5, 1.0, 0.25, 0.1], "omega": 4, "n": None},
}

CANDIDATE_KEYS = {"name", "atom", "atom_params", "scheme", "w0", "bias_range", "encoding", "sigma",
                  "ff_features", "octaves", "hidden"}

HELP = {
    "fit": "fit a network to an image or audio file",
    "eval": "evaluate a saved model on a grid or on listed coordinates",
    "pyramid-fit": "coarse-to-fine patch networks on a Laplacian pyramid",
    "mire-select": "greedy per-layer activation selection",
    "fresh-select": "choose a configuration by matching initial output spectra",
    "meta-fit": "meta-learn an initialization on shifted 1D bumps",
    "analyze-riesz": "frame bounds and partition of unity for translates of an atom",
    "probe-spectral-bias": "per-tone residual curves while fitting a two-tone target",
    "probe-harmonics": "spectrum of a polynomial activation applied to a pure tone",
}


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc
    return parse


def _kv_dict(text: str) -> dict:
    out = {}
    for item in filter(None, text.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {item!r}")
        out[key.strip()] = float(val)
    return out


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc}") from exc


FLAG_TYPES = {
    "hidden": _csv_list(int), "coarse_hidden": _csv_list(int), "dictionary": _csv_list(str),
    "alpha": _csv_list(float), "w0_grid": _csv_list(float), "sigma_grid": _csv_list(float),
    "atom_params": _kv_dict, "operator": _json_arg, "regularizers": _json_arg, "candidates": _json_arg,
}
CHOICES = {
    "encoding": ("identity", "ff-gauss", "ff-log", "hash"),
    "scheme": ("auto", "standard", "siren", "siren_reparam", "finer"),
    "fidelity": ("value", "gradient", "laplacian"),
}


def _flag_type(key, default):
    if key in FLAG_TYPES:
        return FLAG_TYPES[key]
    if isinstance(default, bool):
        return lambda s: s.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    if default is None and key in ("lr", "w0"):
        return float
    if default is None and key in ("batch_size", "width", "height", "length", "n", "coarse_steps", "rate"):
        return int
    return str


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inrlab", description="Coordinate-network signal fitting and analysis.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in DEFAULTS.items():
        p = sub.add_parser(name, help=HELP[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", dest="_config", help="JSON config file; explicit flags override it")
        p.add_argument("--dump-config", dest="_dump", action="store_true",
                       help="print the resolved config as JSON and exit")
        for key, default in {**COMMON, **defaults}.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, type=_flag_type(key, default), choices=CHOICES.get(key))
        if "signal" in defaults:
            p.add_argument("--image", dest="signal", help="alias of --signal")
            p.add_argument("--audio", dest="signal", help="alias of --signal")
    return parser


def resolve_config(command: str, file_cfg: dict | None, flags: dict) -> dict:
    defaults = {**COMMON, **DEFAULTS[command]}
    cfg = {"task": command, **defaults}
    for source in (file_cfg or {}, flags):
        for key, value in source.items():
            if key == "task":
                if value != command:
                    raise ConfigError(f"config is for task {value!r}, not {command!r}")
                continue
            if key not in defaults:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            cfg[key] = value
    _validate(command, cfg)
    return cfg


def _validate(command: str, cfg: dict):
    for key, allowed in CHOICES.items():
        if key in cfg and cfg[key] not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {cfg[key]!r}")
    for key in ("steps", "outer_steps", "trial_steps", "final_steps", "depth", "levels", "patch"):
        if key in cfg and (not isinstance(cfg[key], int) or cfg[key] < 1):
            raise ConfigError(f"{key} must be a positive integer")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    for key in ("hidden", "coarse_hidden"):
        v = cfg.get(key)
        if v is not None and (not isinstance(v, list) or not v or not all(isinstance(h, int) and h > 0 for h in v)):
            raise ConfigError(f"{key} must be a non-empty list of positive integers")
    if "atom_params" in cfg and not isinstance(cfg["atom_params"], dict):
        raise ConfigError("atom_params must be an object")
    if command == "fresh-select":
        for c in cfg["candidates"]:
            if not isinstance(c, dict) or set(c) - CANDIDATE_KEYS:
                raise ConfigError(f"bad candidate {c!r}; allowed keys {sorted(CANDIDATE_KEYS)}")


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


# --- shared builders ------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue().encode()


def _stored(cfg: dict) -> dict:
    """Config as embedded in model files; the output location is not part of the run."""
    return {k: v for k, v in cfg.items() if k != "out_dir"}


def _out(cfg) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _atom(atom_id: str, params: dict, w0, scheme_kind: str) -> Atom:
    params = dict(params)
    if w0 is not None and scheme_kind == "standard" and atom_id in ("sine", "finer", "wire", "hosc", "sinc"):
        params.setdefault("omega", w0)
    return make_atom(atom_id, **params)


def _scheme_kind(cfg_or_cand: dict, atom_id: str) -> str:
    kind = cfg_or_cand.get("scheme", "auto")
    if kind == "auto":
        return {"sine": "siren", "finer": "finer"}.get(atom_id, "standard")
    return kind


def _scheme(kind: str, w0, bias_range: float) -> InitScheme:
    w0 = 30.0 if w0 is None else float(w0)
    if kind == "standard":
        return InitScheme.standard()
    if kind == "finer":
        return InitScheme.finer(w0, bias_range)
    return InitScheme(kind, w0)


def _net(cfg: dict, in_dim: int, out_dim: int):
    atom_id = make_atom(cfg["atom"]).id
    kind = _scheme_kind(cfg, atom_id)
    atom = _atom(cfg["atom"], cfg.get("atom_params", {}), cfg.get("w0"), kind)
    return ArchSpec(in_dim, tuple(cfg["hidden"]), out_dim, atom), _scheme(kind, cfg.get("w0"), cfg.get("bias_range", 1.0))


def _encoder(cfg: dict, d: int, rng: Rng):
    kind = cfg.get("encoding", "identity")
    if kind == "identity":
        return IdentityEncoder(d)
    if kind == "ff-gauss":
        return fourier_gaussian(d, int(cfg.get("ff_features", 64)), float(cfg.get("sigma", 10.0)), rng)
    if kind == "ff-log":
        return fourier_logspaced(d, int(cfg.get("octaves", 6)))
    if kind == "hash":
        return HashGridEncoder(d, cfg["hash_levels"], cfg["hash_base"], cfg["hash_growth"],
                               cfg["hash_table"], cfg["hash_features"], rng=rng)
    raise ConfigError(f"unknown encoding {kind!r}")


def _load_signal(path):
    if path is None:
        raise ConfigError("no input signal given (use --signal, --image or --audio)")
    ext = Path(path).suffix.lower()
    if ext in (".pgm", ".ppm", ".pnm"):
        return load_pgm_ppm(path)
    if ext == ".wav":
        return load_wav(path)
    raise FormatError(f"{path}: unsupported extension {ext!r} (expected .pgm, .ppm or .wav)")


def _signal_meta(item) -> dict:
    if isinstance(item, ImageGrid):
        return {"kind": "image", "shape": list(item.shape), "channels": item.channels}
    return {"kind": "audio", "length": int(item.samples.shape[0]), "rate": item.rate}


def _render_bytes(values: np.ndarray, meta: dict, shape) -> tuple[str, bytes]:
    if meta.get("kind") == "audio" or len(shape) == 1:
        return "reconstruction.wav", encode_wav(AudioClip(int(meta.get("rate") or 16000), values[:, 0]))
    c = values.shape[1]
    if c not in (1, 3):
        raise ConfigError(f"cannot write a {c}-channel image")
    img = ImageGrid(values.reshape(*shape, c))
    return ("reconstruction.pgm" if c == 1 else "reconstruction.ppm"), encode_pnm(img)


def _gradient_targets(values: np.ndarray, grid) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradients (N, c*d, c-major) and Laplacians (N, c) on the lattice."""
    c = values.shape[1]
    img = values.reshape(*grid, c)
    spacing = [2.0 / n for n in grid]
    grads = [np.gradient(img, h, axis=a) for a, h in enumerate(spacing)]
    lap = sum(np.gradient(g, h, axis=a) for a, (g, h) in enumerate(zip(grads, spacing)))
    J = np.stack([g.reshape(-1, c) for g in grads], axis=2)  # (N, c, d)
    return J.reshape(J.shape[0], -1), lap.reshape(-1, c)


def _operator(spec: dict, n: int, grid, seed: int) -> ForwardOperator:
    if not isinstance(spec, dict) or "op" not in spec:
        raise ConfigError('operator must be an object with an "op" key')
    op = spec["op"]
    allowed = {"identity": set(), "mask": {"keep_ratio", "seed"}, "conv": {"kernel", "sigma"},
               "downsample": {"factor"}}
    if op not in allowed:
        raise ConfigError(f"unknown operator {op!r}; expected one of {sorted(allowed)}")
    extra = set(spec) - {"op"} - allowed[op]
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)} for operator {op!r}")
    if op == "identity":
        return ForwardOperator()
    if op == "mask":
        ratio = float(spec.get("keep_ratio", 0.5))
        if not 0 < ratio <= 1:
            raise ConfigError("keep_ratio must be in (0, 1]")
        keep = Rng(int(spec.get("seed", seed))).permutation(n)[: max(1, int(round(ratio * n)))]
        mask = np.zeros(n, dtype=bool)
        mask[keep] = True
        return ForwardOperator("mask", mask=mask)
    if op == "conv":
        if "kernel" in spec:
            return ForwardOperator("conv", kernel=np.asarray(spec["kernel"], dtype=float))
        sigma = float(spec.get("sigma", 1.0))
        r = max(1, int(math.ceil(3 * sigma)))
        k = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
        return ForwardOperator("conv", kernel=k / k.sum())
    return ForwardOperator("downsample", factor=int(spec.get("factor", 2)))


def _regularizers(specs, signal: SampledSignal) -> list[Regularizer]:
    out = []
    for s in specs:
        if not isinstance(s, dict) or set(s) - {"kind", "lam"} or "kind" not in s:
            raise ConfigError(f'regularizer must look like {{"kind": "tv", "lam": 1e-4}}, got {s!r}')
        if s["kind"] == "tv":
            out.append(Regularizer("tv", float(s.get("lam", 0.0)), signal.coords, signal.grid_shape))
        else:
            out.append(Regularizer(s["kind"], float(s.get("lam", 0.0))))
    return out


# --- commands -----------------------------------------------------------------------


def cmd_fit(cfg: dict) -> int:
    item = _load_signal(cfg["signal"])
    signal = to_samples(item)
    rng = Rng(cfg["seed"])
    enc = _encoder(cfg, signal.d, rng.spawn(1))
    arch, scheme = _net(cfg, enc.out_dim, signal.c)
    model = init_model(arch, scheme, rng.spawn(0))
    if cfg["reparam"]:
        model = ReparamModel.from_model(model, rng.spawn(3))
    op = _operator(cfg["operator"], signal.n, signal.grid_shape, cfg["seed"])
    if cfg["batch_size"] is not None and not op.pointwise:
        raise ConfigError(f"minibatching needs a pointwise operator, not {op.kind!r}")
    source = signal.values
    if cfg["fidelity"] != "value":
        J, lap = _gradient_targets(signal.values, signal.grid_shape)
        source = J if cfg["fidelity"] == "gradient" else lap
    measurements = op.apply(source, signal.grid_shape)
    obj = Objective(signal.coords, measurements, op, cfg["fidelity"], signal.grid_shape,
                    tuple(_regularizers(cfg["regularizers"], signal)))
    tcfg = TrainConfig(steps=cfg["steps"], lr=cfg["lr"], batch_size=cfg["batch_size"], seed=cfg["seed"],
                       psnr_every=cfg["psnr_every"])
    out = _out(cfg)
    try:
        res = fit(model, enc, obj, tcfg, reference=signal.values)
    except DivergenceError as exc:
        atomic_write_bytes(out / "metrics.csv", _csv_bytes(("step", "loss", "psnr"), exc.result.run.rows()))
        raise
    final = res.model.collapse() if hasattr(res.model, "collapse") else res.model
    pred = forward_batch(final, res.encoder, signal.coords)
    meta = {**_signal_meta(item), "config": _stored(cfg), "psnr": psnr(pred, signal.values)}
    atomic_write_bytes(out / "metrics.csv", _csv_bytes(("step", "loss", "psnr"), res.run.rows()))
    save_model(out / "model.inr", final, res.encoder, meta)
    name, data = _render_bytes(pred, meta, signal.grid_shape)
    atomic_write_bytes(out / name, data)
    print(f"fit: {cfg['steps']} steps, final loss {_fmt(res.run.losses[-1])}, psnr {_fmt(meta['psnr'])} dB")
    return 0


def _read_coords_csv(path, d: int) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    try:
        float(lines[0].split(",")[0])
    except (IndexError, ValueError):
        lines = lines[1:]  # header row
    try:
        rows = np.loadtxt(lines, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: coordinates must be numeric CSV rows: {exc}") from exc
    if rows.shape[1] != d:
        raise FormatError(f"{path}: expected {d} columns per row, got {rows.shape[1]}")
    return rows


def cmd_eval(cfg: dict) -> int:
    if cfg["model"] is None:
        raise ConfigError("no model file given (use --model)")
    try:
        model, enc, meta = load_model(cfg["model"])
    except ModelFileError as exc:
        raise OSError(f"{cfg['model']}: {exc}") from exc
    out = _out(cfg)
    d = enc.in_dim if hasattr(enc, "in_dim") else model.input_dim
    if cfg["coords"] is not None:
        X = _read_coords_csv(cfg["coords"], d)
        Y = forward_batch(model, enc, X)
        header = [f"x{i}" for i in range(d)] + [f"y{j}" for j in range(Y.shape[1])]
        atomic_write_bytes(out / "values.csv", _csv_bytes(header, np.hstack([X, Y]).tolist()))
        print(f"eval: {X.shape[0]} points")
        return 0
    if d == 1:
        n = cfg["length"] or meta.get("length")
        if not n:
            raise ConfigError("1D model needs --length")
        shape = (int(n),)
        meta = {**meta, "kind": "audio", "rate": cfg["rate"] or meta.get("rate")}
    elif d == 2:
        h0, w0 = meta.get("shape", [None, None])
        h, w = cfg["height"] or h0, cfg["width"] or w0
        if not h or not w:
            raise ConfigError("2D model needs --width and --height")
        shape = (int(h), int(w))
    else:
        raise ConfigError(f"grid evaluation supports 1D and 2D models, not {d}D; use --coords")
    Y = forward_batch(model, enc, lattice_coords(shape))
    name, data = _render_bytes(Y, meta, shape)
    atomic_write_bytes(out / name, data)
    print(f"eval: wrote {name} at {'x'.join(map(str, shape))}")
    return 0


def cmd_pyramid_fit(cfg: dict) -> int:
    item = _load_signal(cfg["signal"])
    if not isinstance(item, ImageGrid):
        raise ConfigError("pyramid-fit needs an image")
    atom_id = make_atom(cfg["atom"]).id
    kind = _scheme_kind(cfg, atom_id)
    atom = _atom(cfg["atom"], cfg["atom_params"], cfg["w0"], kind)
    pyr = miner_fit(item, cfg["levels"], cfg["patch"], cfg["tau"], tuple(cfg["hidden"]), atom,
                    _scheme(kind, cfg["w0"], cfg["bias_range"]),
                    tuple(cfg["coarse_hidden"]) if cfg["coarse_hidden"] else None,
                    cfg["steps"], cfg["coarse_steps"], cfg["lr"], cfg["seed"])
    out = _out(cfg)
    coords = lattice_coords(item.shape)
    rows = []
    for L in range(1, pyr.J + 1):
        img = miner_eval(pyr, coords, L).reshape(item.values.shape)
        active = sum(p.predictor is not None for band in pyr.bands[: L - 1] for p in band)
        rows.append((L, psnr(img, item.values), active))
    atomic_write_bytes(out / "levels.csv", _csv_bytes(("levels", "psnr", "active_patches"), rows))
    name, data = _render_bytes(img.reshape(-1, item.channels), {"kind": "image"}, item.shape)
    atomic_write_bytes(out / name, data)
    print(f"pyramid-fit: {pyr.active_patches()} active patches, psnr {_fmt(rows[-1][1])} dB")
    return 0


def cmd_mire_select(cfg: dict) -> int:
    item = _load_signal(cfg["signal"])
    signal = to_samples(item)
    dictionary = [make_atom(a) for a in cfg["dictionary"]]
    res = mire_select(signal, dictionary, cfg["depth"], cfg["trial_steps"], cfg["width"],
                      cfg["final_steps"], seed=cfg["seed"], lr=cfg["lr"])
    ordered = sorted(dictionary, key=lambda a: ATOM_IDS.index(a.id))
    rows = []
    for stage, errs in enumerate(res.trials):
        for atom, e in zip(ordered, errs):
            rows.append((stage + 1, atom.id, e, int(atom.id == res.atoms[stage].id)))
    out = _out(cfg)
    atomic_write_bytes(out / "mire.csv", _csv_bytes(("stage", "atom", "mse", "selected"), rows))
    pred = forward_batch(res.model, res.encoder, signal.coords)
    meta = {**_signal_meta(item), "config": _stored(cfg), "psnr": psnr(pred, signal.values)}
    save_model(out / "model.inr", res.model, res.encoder, meta)
    name, data = _render_bytes(pred, meta, signal.grid_shape)
    atomic_write_bytes(out / name, data)
    print("mire-select: " + ",".join(a.id for a in res.atoms))
    return 0


def _candidates(cfg: dict, d: int, rng: Rng) -> list[Candidate]:
    specs = list(cfg["candidates"])
    if cfg["w0_grid"] is not None or cfg["sigma_grid"] is not None:
        specs = []
        for w in cfg["w0_grid"] or []:
            specs.append({"name": f"siren-w0-{w:g}", "atom": "sine", "scheme": "siren", "w0": w})
        for s in cfg["sigma_grid"] or []:
            specs.append({"name": f"ff-gauss-sigma-{s:g}", "atom": "relu", "encoding": "ff-gauss", "sigma": s})
    if not specs:
        raise ConfigError("no fresh-select candidates")
    out = []
    for i, spec in enumerate(specs):
        full = {"hidden": cfg["hidden"], **spec}
        enc = _encoder(full, d, rng.spawn(i))
        arch, scheme = _net({**NET, **full}, enc.out_dim, 1)
        out.append(Candidate(arch, scheme, enc, spec.get("name", f"candidate-{i}")))
    return out


def cmd_fresh_select(cfg: dict) -> int:
    item = _load_signal(cfg["signal"])
    signal = to_samples(item)
    cands = _candidates(cfg, signal.d, Rng(cfg["seed"]).spawn(1))
    if signal.c != 1:
        cands = [Candidate(ArchSpec(c.arch.in_dim, c.arch.hidden, signal.c, c.arch.atoms), c.scheme,
                           c.encoder, c.name) for c in cands]
    res = fresh_select(cands, signal, cfg["seed"])
    rows = [(c.name, dist, int(i == res.index)) for i, (c, dist) in enumerate(zip(cands, res.distances))]
    atomic_write_bytes(_out(cfg) / "fresh.csv", _csv_bytes(("candidate", "distance", "selected"), rows))
    print(f"fresh-select: {res.candidate.name} (distance {_fmt(res.distances[res.index])})")
    return 0


def cmd_meta_fit(cfg: dict) -> int:
    family = BumpFamily(cfg["n_points"], cfg["bump_width"], cfg["spread"])
    arch, scheme = _net(cfg, 1, 1)
    mcfg = MetaConfig(cfg["inner_steps"], cfg["inner_lr"], cfg["outer_lr"], cfg["tasks_per_batch"],
                      cfg["outer_steps"], cfg["seed"])
    res = meta_fit(family.sample, arch, mcfg, scheme)
    random_init = init_model(arch, scheme, Rng(cfg["seed"]).spawn(2))
    task_rng = Rng(cfg["seed"]).spawn(3)
    rows = []
    for t in range(cfg["eval_tasks"]):
        center = float(task_rng.uniform(-family.spread, family.spread))
        task = family.task(center)
        meta_err = loss_mse(adapt(res.theta, task, mcfg.inner_steps, mcfg.inner_lr), None, task)
        rand_err = loss_mse(adapt(random_init, task, mcfg.inner_steps, mcfg.inner_lr), None, task)
        rows.append((t, center, meta_err, rand_err))
    out = _out(cfg)
    atomic_write_bytes(out / "meta.csv", _csv_bytes(("outer_step", "loss"),
                                                      [(i + 1, v) for i, v in enumerate(res.outer_losses)]))
    atomic_write_bytes(out / "adaptation.csv", _csv_bytes(("task", "center", "meta_mse", "random_mse"), rows))
    save_model(out / "model.inr", res.theta, IdentityEncoder(1), {"kind": "meta", "config": _stored(cfg)})
    m = float(np.mean([r[2] for r in rows]))
    r = float(np.mean([r[3] for r in rows]))
    print(f"meta-fit: adapted mse {_fmt(m)} from meta init vs {_fmt(r)} from random init")
    return 0


def cmd_analyze_riesz(cfg: dict) -> int:
    atom = make_atom(cfg["atom"], **cfg["atom_params"])
    settings = RieszSettings(K_translates=cfg["k_translates"], window=cfg["window"], density=cfg["density"],
                             tolerance=cfg["tolerance"], max_window=cfg["max_window"])
    rep = riesz_analyze(atom, settings)
    atomic_write_bytes(_out(cfg) / "riesz.csv", _csv_bytes(
        ("atom", "classification", "frame_min", "frame_max", "pou_deviation", "gram_min_singular", "window"),
        [(atom.id, rep.classification, rep.frame_min, rep.frame_max, rep.pou_deviation,
          rep.gram_min_singular, rep.window)]))
    print(f"{atom.id}: {rep.classification} (A={rep.frame_min:.6g}, B={rep.frame_max:.6g}, "
          f"pou={rep.pou_deviation:.3g})")
    return 0


def cmd_probe_spectral_bias(cfg: dict) -> int:
    arch, scheme = _net(cfg, 1, 1)
    res = spectral_bias_probe(arch, scheme, cfg["f_lo"], cfg["f_hi"], cfg["steps"], cfg["every"], cfg["n"],
                              cfg["lr"], cfg["seed"])
    atomic_write_bytes(_out(cfg) / "spectral_bias.csv", _csv_bytes(("step", "lo_db", "hi_db"), res.rows()))
    lo, hi = res.steps_to("lo"), res.steps_to("hi")
    print(f"probe-spectral-bias: -20 dB at step {lo if lo is not None else 'never'} (f={cfg['f_lo']}), "
          f"{hi if hi is not None else 'never'} (f={cfg['f_hi']})")
    return 0


def cmd_probe_harmonics(cfg: dict) -> int:
    rep = harmonic_probe(cfg["alpha"], cfg["omega"], cfg["n"])
    atomic_write_bytes(_out(cfg) / "harmonics.csv", _csv_bytes(("bin", "magnitude"), zip(rep.bins, rep.magnitudes)))
    print("probe-harmonics: bins " + ",".join(map(str, rep.bins)))
    return 0


RUNNERS = {
    "fit": cmd_fit, "eval": cmd_eval, "pyramid-fit": cmd_pyramid_fit, "mire-select": cmd_mire_select,
    "fresh-select": cmd_fresh_select, "meta-fit": cmd_meta_fit, "analyze-riesz": cmd_analyze_riesz,
    "probe-spectral-bias": cmd_probe_spectral_bias, "probe-harmonics": cmd_probe_harmonics,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    command = args.pop("command")
    cfg_path = args.pop("_config", None)
    dump = args.pop("_dump", False)
    try:
        file_cfg = _read_config_file(cfg_path) if cfg_path else None
        cfg = resolve_config(command, file_cfg, args)
        if dump:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        return RUNNERS[command](cfg)
    except (DivergenceError, NonFiniteError, InsufficientDecayError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ModelFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
