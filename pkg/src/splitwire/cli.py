"""Command-line entry point.

Subcommands: profile | sweep | simulate | plan | serve | send. Exit codes
are a stable contract: 0 success, 2 usage error, 3 infeasible plan, 4 I/O
or data error, 5 protocol/transport error. Commands taking --seed are
bit-reproducible on one platform; run manifests list every output file
with its hash.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import socket
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .accounting import count_flops, count_params
from .channel import ChannelProfile, payload_bits
from .cost import DeviceProfile, beta_sweep, normalized_comp, total_task_time
from .graph import INNER_SPLIT_POINTS, apply_split, build_resnet, split_point
from .pipeline import load_image, random_input, run_local
from .planner import bundled_table_path, load_accuracy_table, min_nc, plan
from .weights import WeightFormatError, load_weights, random_weights
from .wire import FeatureServer, FrameError, ProtocolError, SessionConfig, send, serve

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO, EXIT_PROTOCOL = 0, 2, 3, 4, 5


class UsageError(ValueError):
    pass


def _add_model_args(p):
    p.add_argument("--model", choices=("resnet18", "resnet34"), default="resnet34")
    p.add_argument("--variant", choices=("cifar", "standard"), default="cifar")
    p.add_argument("--classes", type=int, default=100)


def _add_split_args(p, required=False):
    p.add_argument("--split", default=None, required=required, help="split point, SP-0 .. SP-6")
    p.add_argument("--n-c", type=int, default=1024, help="feature dimension (power of two)")
    p.add_argument("--stages", type=int, choices=(1, 2), default=2, help="decompression stages")


def _add_output_args(p):
    p.add_argument("--output-dir", type=Path, default=None)
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--seed", type=int, default=0)


def _build_graph(args):
    return build_resnet(18 if args.model == "resnet18" else 34, args.variant, args.classes)


def _parse_split(value):
    try:
        return split_point(value)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _build_split(args, graph):
    sp = _parse_split(args.split)
    if sp.id in (0, 6):
        return apply_split(graph, sp)
    n_c = args.n_c
    if n_c < 1 or (n_c & (n_c - 1)) != 0:
        raise UsageError(f"--n-c must be a power of two, got {n_c}")
    return apply_split(graph, sp, n_c, args.stages)


def _get_weights(args, model):
    if getattr(args, "weights", None):
        return load_weights(args.weights)
    return random_weights(model, args.seed)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest_config(args) -> dict:
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "output_dir"):
            continue
        cfg[key] = str(value) if isinstance(value, Path) else value
    return cfg


def _write_outputs(args, command: str, files: dict) -> list:
    """Write {name: text} files plus the run manifest; returns written paths."""
    if args.output_dir is None:
        return []
    outdir = args.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in files.items():
        path = outdir / name
        path.write_text(text)
        written.append(path)
    manifest = {
        "tool": "splitwire",
        "version": __version__,
        "command": command,
        "config": _manifest_config(args),
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in written],
    }
    mpath = outdir / "run_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written + [mpath]


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- profile


def _profile_rows(graph, n_c, stages):
    rows = []
    for sp in INNER_SPLIT_POINTS:
        model = apply_split(graph, sp, n_c, stages)
        fl, pa = count_flops(model), count_params(model)
        rows.append(
            (
                sp.key,
                n_c,
                fl.f_m_t,
                round(fl.proportion_t, 2),
                pa.params_t,
                round(pa.proportion_t, 2),
                fl.f_m_r,
                round(fl.proportion_r, 2),
                pa.params_r,
                round(pa.proportion_r, 2),
            )
        )
    return rows


_PROFILE_HEADER = (
    "split", "n_c",
    "flops_t", "flops_prop_t", "params_t", "params_prop_t",
    "flops_r", "flops_prop_r", "params_r", "params_prop_r",
)


def cmd_profile(args) -> int:
    graph = _build_graph(args)
    if args.all_splits:
        rows = _profile_rows(graph, args.n_c, args.stages)
        csv_text = _csv(rows, _PROFILE_HEADER)
        if args.format == "json":
            print(json.dumps([dict(zip(_PROFILE_HEADER, r)) for r in rows], indent=2))
        elif args.format == "csv":
            print(csv_text, end="")
        else:
            print(f"{graph.name} split profile (n_c={args.n_c}, stages={args.stages})")
            print(f"{'split':6} {'FLOPs_t':>14} {'%':>6} {'params_t':>12} {'%':>6} {'FLOPs_r':>14} {'%':>6} {'params_r':>12} {'%':>6}")
            for r in rows:
                print(f"{r[0]:6} {r[2]:>14,} {r[3]:>6.2f} {r[4]:>12,} {r[5]:>6.2f} {r[6]:>14,} {r[7]:>6.2f} {r[8]:>12,} {r[9]:>6.2f}")
        _write_outputs(args, "profile", {"profile.csv": csv_text})
        return EXIT_OK

    if args.split is not None:
        model = _build_split(args, graph)
        fl, pa = count_flops(model), count_params(model)
        per_layer = [("encoder", n, m) for n, m in fl.per_layer_t] + [("decoder", n, m) for n, m in fl.per_layer_r]
        summary = {
            "model": model.name,
            "flops_t": fl.f_m_t, "flops_r": fl.f_m_r, "flops_vanilla": fl.f_m,
            "flops_prop_t": round(fl.proportion_t, 2), "flops_prop_r": round(fl.proportion_r, 2),
            "params_t": pa.params_t, "params_r": pa.params_r,
            "params_prop_t": round(pa.proportion_t, 2), "params_prop_r": round(pa.proportion_r, 2),
        }
        csv_text = _csv(per_layer, ("side", "layer", "flops"))
        if args.format == "json":
            print(json.dumps(summary, indent=2))
        else:
            print(f"{model.name}: transmitter {fl.f_m_t:,} MACs ({fl.proportion_t:.2f}%), "
                  f"receiver {fl.f_m_r:,} MACs ({fl.proportion_r:.2f}%)")
            print(f"params: transmitter {pa.params_t:,} ({pa.proportion_t:.2f}%), receiver {pa.params_r:,} ({pa.proportion_r:.2f}%)")
            if args.format == "csv":
                print(csv_text, end="")
        _write_outputs(args, "profile", {"profile_layers.csv": csv_text, "profile.json": json.dumps(summary, indent=2) + "\n"})
        return EXIT_OK

    fl, pa = count_flops(graph), count_params(graph)
    rows = []
    shape = graph.input_shape
    params_by_layer = {}
    for name, n in count_params(graph).per_tensor_t:
        layer = name.rsplit(".", 1)[0]
        params_by_layer[layer] = params_by_layer.get(layer, 0) + n
    for (name, macs), out in zip(fl.per_layer_t, graph.output_shapes):
        layer_params = sum(v for k, v in params_by_layer.items() if k == name or k.startswith(name + "."))
        rows.append((name, str(out), macs, layer_params))
        shape = out
    csv_text = _csv(rows, ("layer", "out_shape", "flops", "params"))
    if args.format == "json":
        print(json.dumps({"model": graph.name, "flops": fl.f_m, "params": pa.params_total,
                          "layers": [dict(zip(("layer", "out_shape", "flops", "params"), r)) for r in rows]}, indent=2))
    elif args.format == "csv":
        print(csv_text, end="")
    else:
        print(f"{graph.name}: {fl.f_m:,} MACs, {pa.params_total:,} params")
        for name, out, macs, p in rows:
            print(f"  {name:24} {out:>14} {macs:>14,} {p:>12,}")
    _write_outputs(args, "profile", {"profile_layers.csv": csv_text})
    return EXIT_OK


# ---------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    if args.kind == "beta":
        if args.points < 1:
            raise UsageError("--points must be >= 1")
        graph = _build_graph(args)
        splits = [_parse_split(s) for s in args.splits.split(",") if s.strip()]
        if not splits:
            raise UsageError("--splits must name at least one split point")
        grid = np.logspace(math.log10(args.beta_min), math.log10(args.beta_max), args.points)
        rows = []
        for sp in splits:
            report = count_flops(apply_split(graph, sp, args.n_c, args.stages))
            for beta, value in beta_sweep(report, grid):
                rows.append((f"{beta:.10g}", sp.key, f"{value:.10g}"))
        csv_text = _csv(rows, ("beta", "split", "normalized_tcomp"))
        print(csv_text, end="")
        _write_outputs(args, "sweep", {"beta_sweep.csv": csv_text})
        return EXIT_OK

    # kind == "nc"
    if args.table is None:
        raise UsageError(
            "the nc sweep needs an accuracy source: pass --table <csv> (e.g. the bundled "
            f"{bundled_table_path().name}) or generate one from trained weights with the "
            "trainer's eval-grid command"
        )
    table = load_accuracy_table(bundled_table_path() if args.table == "bundled" else args.table)
    rows = []
    for sp in (_parse_split(s) for s in args.splits.split(",") if s.strip()):
        result = min_nc(table, sp, args.snr, args.floor, model=args.model_id)
        rows.append((sp.key, f"{args.snr:g}", f"{args.floor:g}", result if result is not None else "infeasible"))
    csv_text = _csv(rows, ("split", "snr_db", "floor", "min_nc"))
    print(csv_text, end="")
    _write_outputs(args, "sweep", {"nc_sweep.csv": csv_text})
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    graph = _build_graph(args)
    model = _build_split(args, graph)
    weights = _get_weights(args, model)
    if args.image:
        x = load_image(args.image, graph.input_shape, dataset="cifar10" if args.classes == 10 else "cifar100")
    else:
        x = random_input(graph.input_shape, args.seed)
    noise_seed = args.noise_seed if args.noise_seed is not None else args.seed + 1
    result = run_local(model, weights, x, snr_db=args.snr, dtype=args.dtype, seed=noise_seed)

    out = {
        "model": model.name,
        "label": result.label,
        "snr_db": args.snr,
        "dtype": args.dtype,
        "noise_seed": noise_seed,
        "payload_bytes": len(result.payload),
        "payload_bits": payload_bits(model.n_c, args.dtype, model.split),
        "zhat_sha256": hashlib.sha256(result.zhat_bytes).hexdigest(),
        "weights_sha256": weights.sha256,
    }
    if args.rate is not None:
        if args.alpha_t is None or args.alpha_r is None:
            raise UsageError("--rate requires --alpha-t and --alpha-r")
        cost = total_task_time(
            count_flops(model),
            DeviceProfile(args.alpha_t),
            DeviceProfile(args.alpha_r),
            out["payload_bits"],
            ChannelProfile(args.snr, args.rate, args.dtype),
        )
        out["cost"] = cost.to_dict()

    if args.format == "json":
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(f"label: {result.label}")
        print(f"payload: {len(result.payload)} bytes ({out['payload_bits']} semantic bits)")
        if "cost" in out:
            c = out["cost"]
            print(f"t_task: {c['t_task']:.6g} s (comp {c['t_comp']:.6g} + comm {c['t_comm']:.6g})")
    _write_outputs(args, "simulate", {"simulate_result.json": json.dumps(out, indent=2, sort_keys=True) + "\n"})
    return EXIT_OK


# ---------------------------------------------------------------- plan


def cmd_plan(args) -> int:
    table = load_accuracy_table(bundled_table_path() if args.table == "bundled" else args.table)
    graph = _build_graph(args)
    # computation cost per split evaluated at the table's largest n_c for
    # that split (conservative; compute is nearly n_c-independent)
    reports = {}
    for rec in table.records:
        if args.model_id is not None and rec.model != args.model_id:
            continue
        key = rec.split.key
        if key not in reports or rec.n_c > reports[key][0]:
            reports[key] = (rec.n_c, None)
    for key, (n_c, _) in list(reports.items()):
        sp = split_point(key)
        model = apply_split(graph, sp, None if sp.id in (0, 6) else n_c, args.stages)
        reports[key] = count_flops(model)

    channel = ChannelProfile(args.snr, args.rate, args.dtype)
    result = plan(table, reports, DeviceProfile(args.alpha_t), DeviceProfile(args.alpha_r), channel, args.floor,
                  model=args.model_id)
    text = json.dumps(result.to_dict(), indent=2, sort_keys=True)
    if args.format == "json":
        print(text)
    elif result.feasible:
        print(f"plan: {result.split.key} with n_c={result.n_c} "
              f"(top1 {result.top1:.4f} at {result.snr_db_used:g} dB, t_task {result.cost.t_task:.6g} s)")
    else:
        print(f"infeasible: {result.diagnostics}")
    _write_outputs(args, "plan", {"plan_result.json": text + "\n"})
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


# ---------------------------------------------------------------- serve / send


def cmd_serve(args) -> int:
    graph = _build_graph(args)
    model = _build_split(args, graph)
    weights = _get_weights(args, model)
    config = SessionConfig(host=args.host, port=args.port, snr_db=args.snr, dtype=args.dtype, timeout=args.timeout)
    server = serve(model, weights, config)
    host, port = server.address[:2]
    print(f"serving {model.name} on {host}:{port} (snr {args.snr:g} dB, fingerprint {weights.fingerprint.hex()})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def cmd_send(args) -> int:
    graph = _build_graph(args)
    model = _build_split(args, graph)
    weights = _get_weights(args, model)
    if args.image:
        x = load_image(args.image, graph.input_shape, dataset="cifar10" if args.classes == 10 else "cifar100")
    else:
        x = random_input(graph.input_shape, args.seed)
    config = SessionConfig(
        host=args.host, port=args.port, snr_db=args.snr, dtype=args.dtype, timeout=args.timeout,
        alpha_t=args.alpha_t, alpha_r=args.alpha_r, rate=args.rate,
    )
    noise_seed = args.noise_seed if args.noise_seed is not None else args.seed + 1
    label, timing = send(model, weights, x, config, seed=noise_seed)
    out = {"label": label, "noise_seed": noise_seed, "timing": timing.to_dict()}
    if args.format == "json":
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(f"label: {label}")
        print(f"encoder: {timing.encode_s:.6f} s, transfer: {timing.transfer_s:.6f} s, server: {timing.server_s:.6f} s")
        if timing.predicted:
            print(f"predicted t_task: {timing.predicted.t_task:.6g} s")
    _write_outputs(args, "send", {"send_result.json": json.dumps(out, indent=2, sort_keys=True) + "\n"})
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitwire", description=__doc__)
    parser.add_argument("--version", action="version", version=f"splitwire {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="FLOP/parameter accounting per side")
    _add_model_args(p)
    _add_split_args(p)
    p.add_argument("--all-splits", action="store_true", help="profile SP-1..SP-5 in one table")
    _add_output_args(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("sweep", help="beta sweep of normalized compute, or minimum-n_c sweep")
    p.add_argument("--kind", choices=("beta", "nc"), required=True)
    _add_model_args(p)
    p.add_argument("--splits", default="SP-2,SP-3,SP-4")
    p.add_argument("--n-c", type=int, default=1024)
    p.add_argument("--stages", type=int, choices=(1, 2), default=2)
    p.add_argument("--beta-min", type=float, default=1e-5)
    p.add_argument("--beta-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=26)
    p.add_argument("--table", default=None, help="accuracy CSV path, or 'bundled'")
    p.add_argument("--model-id", default=None, help="filter accuracy rows by model identifier")
    p.add_argument("--snr", type=float, default=5.0)
    p.add_argument("--floor", type=float, default=0.66)
    _add_output_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="local end-to-end split inference")
    _add_model_args(p)
    _add_split_args(p, required=True)
    p.add_argument("--weights", default=None, help="weight container path (default: seeded random weights)")
    p.add_argument("--image", default=None, help="input image (PNG or raw CHW f32); default seeded random input")
    p.add_argument("--snr", type=float, default=float("inf"))
    p.add_argument("--dtype", choices=("f32", "u8"), default="f32")
    p.add_argument("--noise-seed", type=int, default=None)
    p.add_argument("--alpha-t", type=float, default=None)
    p.add_argument("--alpha-r", type=float, default=None)
    p.add_argument("--rate", type=float, default=None)
    _add_output_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", help="choose (split, n_c) minimizing task time under an accuracy floor")
    _add_model_args(p)
    p.add_argument("--table", default="bundled")
    p.add_argument("--model-id", default=None)
    p.add_argument("--stages", type=int, choices=(1, 2), default=2)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--floor", type=float, required=True)
    p.add_argument("--dtype", choices=("f32", "u8"), default="f32")
    p.add_argument("--alpha-t", type=float, required=True)
    p.add_argument("--alpha-r", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    _add_output_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("serve", help="receiver-side networked runner")
    _add_model_args(p)
    _add_split_args(p, required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7355)
    p.add_argument("--snr", type=float, default=float("inf"))
    p.add_argument("--dtype", choices=("f32", "u8"), default="f32")
    p.add_argument("--timeout", type=float, default=30.0)
    _add_output_args(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("send", help="transmitter-side networked runner")
    _add_model_args(p)
    _add_split_args(p, required=True)
    p.add_argument("--weights", default=None)
    p.add_argument("--image", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7355)
    p.add_argument("--snr", type=float, default=float("inf"), help="for the predicted cost report only")
    p.add_argument("--dtype", choices=("f32", "u8"), default="f32")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--noise-seed", type=int, default=None)
    p.add_argument("--alpha-t", type=float, default=None)
    p.add_argument("--alpha-r", type=float, default=None)
    p.add_argument("--rate", type=float, default=None)
    _add_output_args(p)
    p.set_defaults(func=cmd_send)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProtocolError, FrameError, ConnectionError, socket.timeout) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (WeightFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
