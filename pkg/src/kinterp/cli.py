"""Command-line entry point: dataset, mask, train, infer, eval subcommands.

Every option can also come from a flat ``key = value`` config file passed via
``--config``; explicit flags win over file values, unknown keys are rejected
by name, and the fully resolved configuration is echoed into the output
directory so any run can be repeated exactly.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (
    CheckpointError,
    ConfigError,
    DimensionError,
    FormatError,
    KInterpError,
    SpecError,
    UnsupportedSizeError,
)
from .kspace import read_volume, write_volume
from .model import ALL_PLANES, ModelConfig
from .phantom import DatasetSpec, make_dataset
from .pipeline import (
    TrainConfig,
    evaluate,
    infer,
    train,
    write_pgm_frames,
    write_report_csv,
)
from .sampling import generate_mask, load_mask, save_mask

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_FORMAT = 4
EXIT_DIMENSION = 5

_COMMAND_KEYS = {
    "dataset": ["seed", "out", "dims", "n_train", "n_test"],
    "mask": ["seed", "out", "dims", "R"],
    "train": [
        "seed",
        "out",
        "manifest",
        "dims",
        "R",
        "steps",
        "tiny",
        "max_lr",
        "warmup_fraction",
        "initial_div",
        "final_div",
        "embed_dim",
        "n_heads",
        "n_layers",
        "mlp_ratio",
        "kirm_patch",
        "kirm_planes",
        "loss_weight_hdr",
        "hdr_eps",
    ],
    "infer": ["out", "input", "checkpoint", "mask"],
    "eval": ["seed", "out", "checkpoint", "manifest", "R"],
}


def _parse_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file {p} does not exist")
    values: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = raw.strip()
    return values


class _Resolver:
    """Merge flag values, config-file values, and defaults for one command."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        file_cfg = _parse_config_file(args.config) if args.config else {}
        allowed = set(_COMMAND_KEYS[command])
        for key in file_cfg:
            if key not in allowed:
                raise ConfigError(f"unknown config key {key!r} for command {command!r}")
        self.file_cfg = file_cfg
        self.args = args
        self.resolved: dict[str, str] = {}

    def get(self, key: str, cast, default=None, required: bool = False):
        flag = getattr(self.args, key, None)
        if flag is not None:
            value = cast(flag) if isinstance(flag, str) else flag
        elif key in self.file_cfg:
            value = cast(self.file_cfg[key])
        else:
            value = default
        if value is None and required:
            raise ConfigError(f"missing required option {key!r} for {self.command!r}")
        if value is not None:
            self.resolved[key] = _format_value(value)
        return value

    def write_echo(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = [f"{key} = {self.resolved[key]}" for key in _COMMAND_KEYS[self.command] if key in self.resolved]
        path = out_dir / "resolved_config.txt"
        path.write_text("\n".join(lines) + "\n")
        return path


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def _cast_bool(raw: str) -> bool:
    lowered = str(raw).strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _cast_dims(raw: str) -> tuple[int, int, int]:
    parts = str(raw).split(",")
    if len(parts) != 3:
        raise ConfigError(f"dims must be 'X,Y,T', got {raw!r}")
    try:
        x, y, t = (int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"dims must be integers, got {raw!r}") from exc
    return x, y, t


def _cast_r_list(raw: str) -> list[float]:
    try:
        values = [float(p) for p in str(raw).split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad acceleration list {raw!r}") from exc
    if not values:
        raise ConfigError("acceleration list is empty")
    return values


def _cast_planes(raw: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in str(raw).split(",") if p.strip())
    unknown = set(names) - set(ALL_PLANES)
    if unknown:
        raise ConfigError(f"unknown refinement planes {sorted(unknown)}")
    return names


def _cast_int(raw) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected an integer, got {raw!r}") from exc


def _cast_float(raw) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a number, got {raw!r}") from exc


# ---- subcommands -----------------------------------------------------------


def _cmd_dataset(args) -> int:
    res = _Resolver("dataset", args)
    seed = res.get("seed", _cast_int, 0)
    out = Path(res.get("out", str, required=True))
    dims = res.get("dims", _cast_dims, (32, 32, 8))
    n_train = res.get("n_train", _cast_int, 4)
    n_test = res.get("n_test", _cast_int, 2)
    manifest = make_dataset(out, n_train, n_test, DatasetSpec(*dims), seed)
    res.write_echo(out)
    print(f"wrote {manifest}")
    return EXIT_OK


def _cmd_mask(args) -> int:
    res = _Resolver("mask", args)
    seed = res.get("seed", _cast_int, 0)
    out = Path(res.get("out", str, required=True))
    dims = res.get("dims", _cast_dims, (32, 32, 8))
    r = res.get("R", _cast_float, 4.0)
    mask = generate_mask(dims[1], dims[2], r, seed)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "mask.kmask"
    save_mask(mask, path)
    res.write_echo(out)
    print(f"wrote {path}")
    return EXIT_OK


def _model_config(res: _Resolver, dims: tuple[int, int, int]) -> ModelConfig:
    tiny = res.get("tiny", _cast_bool, False)
    defaults = dict(embed_dim=32, n_heads=4, n_layers=2) if tiny else dict(
        embed_dim=512, n_heads=8, n_layers=8
    )
    return ModelConfig(
        x_dim=dims[0],
        y_dim=dims[1],
        t_dim=dims[2],
        embed_dim=res.get("embed_dim", _cast_int, defaults["embed_dim"]),
        n_heads=res.get("n_heads", _cast_int, defaults["n_heads"]),
        n_layers=res.get("n_layers", _cast_int, defaults["n_layers"]),
        mlp_ratio=res.get("mlp_ratio", _cast_int, 4),
        kirm_patch=res.get("kirm_patch", _cast_int, 4),
        kirm_planes=res.get("kirm_planes", _cast_planes, ALL_PLANES),
        loss_weight_hdr=res.get("loss_weight_hdr", _cast_float, 1.0),
        hdr_eps=res.get("hdr_eps", _cast_float, 0.5),
    )


def _cmd_train(args) -> int:
    res = _Resolver("train", args)
    seed = res.get("seed", _cast_int, 0)
    out = Path(res.get("out", str, required=True))
    manifest = Path(res.get("manifest", str, required=True))
    steps = res.get("steps", _cast_int, 200)
    r_train = res.get("R", _cast_float, 4.0)
    dims = res.get("dims", _cast_dims)
    if dims is None:
        from .pipeline import load_manifest

        pairs = load_manifest(manifest).get("train", [])
        if not pairs:
            raise FormatError(f"manifest {manifest} has no train sequences")
        probe = read_volume(pairs[0][1])
        dims = (probe.x_dim, probe.y_dim, probe.t_dim)
        res.resolved["dims"] = _format_value(dims)
    cfg = TrainConfig(
        model=_model_config(res, dims),
        manifest=manifest,
        r_train=r_train,
        steps=steps,
        seed=seed,
        max_lr=res.get("max_lr", _cast_float, 1e-4),
        warmup_fraction=res.get("warmup_fraction", _cast_float, 0.3),
        initial_div=res.get("initial_div", _cast_float, 25.0),
        final_div=res.get("final_div", _cast_float, 1e4),
    )
    result = train(cfg, out)
    res.write_echo(out)
    print(f"wrote {result.checkpoint_path} and {result.log_path}")
    return EXIT_OK


def _cmd_infer(args) -> int:
    res = _Resolver("infer", args)
    out = Path(res.get("out", str, required=True))
    input_path = Path(res.get("input", str, required=True))
    checkpoint = Path(res.get("checkpoint", str, required=True))
    mask_path = Path(res.get("mask", str, required=True))
    for p in (input_path, checkpoint, mask_path):
        if not p.exists():
            raise FileNotFoundError(f"{p} does not exist")
    volume = read_volume(input_path)
    mask = load_mask(mask_path)
    recon = infer(checkpoint, volume, mask)
    out.mkdir(parents=True, exist_ok=True)
    recon_path = out / "recon.kvol"
    write_volume(recon.image, recon_path)
    frames = write_pgm_frames(recon.image, out / "frames")
    res.write_echo(out)
    print(f"wrote {recon_path} and {len(frames)} PGM frames")
    return EXIT_OK


def _cmd_eval(args) -> int:
    res = _Resolver("eval", args)
    seed = res.get("seed", _cast_int, 0)
    out = Path(res.get("out", str, required=True))
    checkpoint = Path(res.get("checkpoint", str, required=True))
    manifest = Path(res.get("manifest", str, required=True))
    r_values = res.get("R", _cast_r_list, [4.0])
    if not checkpoint.exists():
        raise FileNotFoundError(f"{checkpoint} does not exist")
    model_reports, baseline_reports = evaluate(checkpoint, manifest, r_values, seed)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.csv"
    baseline_path = out / "baseline.csv"
    write_report_csv(model_reports, report_path)
    write_report_csv(baseline_reports, baseline_path)
    res.write_echo(out)
    for report, baseline in zip(model_reports, baseline_reports):
        agg = report.aggregate()
        base = baseline.aggregate()
        print(
            f"R={report.r_nominal:g} model psnr={agg['psnr'][0]:.3f} "
            f"ssim={agg['ssim'][0]:.4f} nmse={agg['nmse'][0]:.5f} | "
            f"zero-filled psnr={base['psnr'][0]:.3f}"
        )
    print(f"wrote {report_path} and {baseline_path}")
    return EXIT_OK


# ---- wiring -----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinterp",
        description="Transformer k-space interpolation for dynamic MRI (desk scale)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("dataset", help="generate a phantom dataset with manifest")
    common(p)
    p.add_argument("--seed")
    p.add_argument("--dims", help="volume extents X,Y,T")
    p.add_argument("--n-train", dest="n_train")
    p.add_argument("--n-test", dest="n_test")
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("mask", help="generate a ky-t undersampling mask")
    common(p)
    p.add_argument("--seed")
    p.add_argument("--dims", help="volume extents X,Y,T (Y and T are used)")
    p.add_argument("--R", help="nominal acceleration factor")
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("train", help="train an interpolation model")
    common(p)
    p.add_argument("--seed")
    p.add_argument("--manifest")
    p.add_argument("--dims", help="volume extents X,Y,T (default: from manifest)")
    p.add_argument("--R", help="training acceleration factor")
    p.add_argument("--steps")
    p.add_argument("--tiny", action="store_const", const=True, default=None,
                   help="use the desk-scale model preset (d=32, 2 layers, 4 heads)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="reconstruct one undersampled volume")
    common(p)
    p.add_argument("input", nargs="?", default=None, help="undersampled k-space .kvol")
    p.add_argument("--checkpoint")
    p.add_argument("--mask", help="path to the .kmask sampling pattern")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("eval", help="score a checkpoint on the test split")
    common(p)
    p.add_argument("--seed")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest")
    p.add_argument("--R", help="comma-separated acceleration factors")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SpecError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: missing-file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (FormatError, CheckpointError) as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (DimensionError, UnsupportedSizeError) as exc:
        print(f"error: dimension: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except KInterpError as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
