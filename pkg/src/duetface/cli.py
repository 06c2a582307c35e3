"""Command-line entry points: ``duetface <command> --help``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import protocol
from .backbone import cosine_similarity, load_weights, save_weights
from .channel_split import SplitSpec, spec_for_image, split, zero_pad_reconstruct
from .color_frequency import (
    FREQS,
    channel_energy,
    channel_info,
    image_to_frequency,
    read_ppm,
    write_ppm,
)
from .corpus import corpus_dir, corpus_images, landmarks_for
from .facial_roi import read_landmarks, synthetic_landmarks
from .pipeline import ClientConfig, client_backbone, client_run, server_backbone
from .privacy_metrics import DEFAULT_SSIM_THRESHOLD, privacy_report
from .transport import DEFAULT_LISTEN, LISTEN_ENV, QueryServer, listen_address, loopback, query_server

DEFAULT_K_SWEEP = (1, 4, 10, 20, 32)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    k: int = 10
    mode: str = "compact"
    seed: int = 0
    w: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    query_id: int = 0
    threshold: float = DEFAULT_SSIM_THRESHOLD

    def __post_init__(self):
        if not 0 <= self.k <= 64:
            raise UsageError(f"--k must be in [0, 64], got {self.k}")
        if self.mode not in protocol.MODE_NAMES:
            raise UsageError(f"--mode must be 'full' or 'compact', got {self.mode!r}")
        if len(self.w) != 4:
            raise UsageError(f"--w needs 4 comma-separated values, got {len(self.w)}")
        if not 0 <= self.seed < 2**64 or not 0 <= self.query_id < 2**64:
            raise UsageError("--seed and --query-id must be unsigned 64-bit integers")

    def client(self, spec: SplitSpec | None = None) -> ClientConfig:
        return ClientConfig(k=self.k, mode=self.mode, seed=self.seed, query_id=self.query_id, spec=spec)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


_CONFIG_KEYS = {"k": int, "mode": str, "seed": int, "w": _floats, "query_id": int, "threshold": float}


def read_config_file(path: str | Path) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{n}: expected one of {sorted(_CONFIG_KEYS)} as key=value")
        try:
            out[key] = _CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: {exc}") from exc
    return out


def run_config(args) -> RunConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(**values)


def _landmarks(image: Path, path: str | None):
    if path:
        return read_landmarks(path)
    sidecar = landmarks_for(image)
    return read_landmarks(sidecar) if sidecar.exists() else synthetic_landmarks()


def _load_spec(path: str | None) -> SplitSpec | None:
    return SplitSpec.load(path) if path else None


# -- commands ---------------------------------------------------------------

def cmd_energy_report(args, out) -> int:
    img = read_ppm(args.image)
    report = channel_energy(image_to_frequency(img))
    out.write("# channel energy (mean |coefficient|)\n")
    out.write(f"{'channel':>7} {'comp':>4} {'u':>2} {'v':>2} {'energy':>14}\n")
    for c, e in enumerate(report.energy):
        comp, (u, v) = channel_info(c)
        out.write(f"{c:>7} {comp:>4} {u:>2} {v:>2} {e:>14.6f}\n")
    out.write("# cumulative luma energy of the top-k channels\n")
    out.write(f"{'k':>3} {'channel':>7} {'energy':>14} {'cumulative':>14} {'fraction':>9}\n")
    y = report.ranking[0]
    cum = np.cumsum(report.energy[y])
    frac = report.cumulative_fraction(0)
    for k in range(FREQS):
        out.write(f"{k + 1:>3} {y[k]:>7} {report.energy[y[k]]:>14.6f} {cum[k]:>14.6f} {frac[k]:>9.4f}\n")
    return 0


def cmd_split(args, out) -> int:
    cfg = run_config(args)
    img = read_ppm(args.image)
    spec = _load_spec(args.spec) or spec_for_image(img, cfg.k)
    pair = split(image_to_frequency(img, upsample=False), spec)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_ppm(outdir / "x_s.ppm", zero_pad_reconstruct(pair.x_s, spec, "s"))
    write_ppm(outdir / "x_c.ppm", zero_pad_reconstruct(pair.x_c, spec, "c"))
    spec.save(outdir / "spec.txt")
    report = privacy_report(img, pair, cfg.threshold)
    out.write(report.to_json() + "\n" if args.json else report.to_text())
    return 0


def cmd_demo(args, out) -> int:
    cfg = run_config(args)
    image = Path(args.image)
    img = read_ppm(image)
    spec = _load_spec(args.spec)
    msg = client_run(img, _landmarks(image, args.landmarks), cfg.client(spec))
    model = server_backbone(cfg.k, cfg.seed, cfg.w)
    resp = loopback(msg, model)
    again = loopback(client_run(img, _landmarks(image, args.landmarks), cfg.client(spec)), model)
    report = privacy_report(img, split(image_to_frequency(img, upsample=False), msg.spec), cfg.threshold)

    cost = protocol.comm_cost(msg)
    lines = {
        "query_id": str(resp.query_id),
        "mode": cfg.mode,
        "k": str(cfg.k),
        "roi_fallback": str(msg.roi_fallback).lower(),
        "mask_sizes": ",".join(f"{m.shape[0]}x{m.shape[1]}" for m in msg.masks),
        "comm_xs": str(cost.x_s),
        "comm_masks": str(cost.masks),
        "comm_total": str(cost.total),
    }
    if msg.mode == protocol.MODE_COMPACT and msg.k == 10:
        paper = protocol.comm_cost(msg, paper_accounting=True)
        lines["comm_total_paper"] = str(paper.total)
    lines["repeat_cosine"] = f"{cosine_similarity(resp.embedding, again.embedding):.6f}"
    lines["embedding"] = ",".join(f"{v:.6f}" for v in resp.embedding)
    if args.json:
        doc = dict(lines, privacy=json.loads(report.to_json()))
        out.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        out.writelines(f"{k}={v}\n" for k, v in lines.items())
        out.write(report.to_text())
    return 0


def cmd_init_weights(args, out) -> int:
    cfg = run_config(args)
    model = server_backbone(cfg.k, cfg.seed) if args.role == "server" else client_backbone(cfg.k, cfg.seed)
    save_weights(model, args.out)
    out.write(f"wrote {args.role} weights ({model.input_channels} input channels) to {args.out}\n")
    return 0


def _server_model(args, cfg: RunConfig):
    if args.weights:
        return load_weights(args.weights, cfg.w)
    return server_backbone(cfg.k, cfg.seed, cfg.w)


def cmd_serve(args, out) -> int:
    cfg = run_config(args)
    model = _server_model(args, cfg)
    mode = protocol.MODE_NAMES[cfg.mode] if args.mode else None
    with QueryServer(listen_address(args.listen), model, mode) as server:
        out.write(f"listening on {server.address}\n")
        out.flush()
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
    return 0


def cmd_query(args, out) -> int:
    cfg = run_config(args)
    image = Path(args.image)
    model = load_weights(args.client_weights) if args.client_weights else None
    msg = client_run(read_ppm(image), _landmarks(image, args.landmarks), cfg.client(_load_spec(args.spec)), model)
    resp = query_server(msg, args.server)
    if args.out:
        Path(args.out).write_bytes(protocol.encode_tensor(resp.embedding))
    out.write(f"query_id={resp.query_id}\nelements={resp.total}\n")
    out.write("embedding=" + ",".join(f"{v:.6f}" for v in resp.embedding) + "\n")
    return 0


def cmd_eval_privacy(args, out) -> int:
    cfg = run_config(args)
    images = corpus_images(args.corpus)
    if not images:
        raise UsageError(f"no .ppm images in {args.corpus or corpus_dir()}")
    ks = _ints(args.ks)
    if not ks or any(not 0 <= k <= 64 for k in ks):
        raise UsageError(f"--ks must list values in [0, 64], got {args.ks!r}")
    rows = []
    verdicts = {}
    for path in images:
        img = read_ppm(path)
        compact = image_to_frequency(img, upsample=False)
        series = []
        for k in ks:
            r = privacy_report(img, split(compact, spec_for_image(img, k)), cfg.threshold)
            rows.append((path.stem, r))
            series.append(r.ssim_xs)
        verdicts[path.stem] = all(b <= a for a, b in zip(series, series[1:]))
    monotone = all(verdicts.values())
    if args.json:
        doc = {
            "rows": [dict(json.loads(r.to_json()), image=name) for name, r in rows],
            "monotone": verdicts,
            "monotone_all": monotone,
        }
        out.write(json.dumps(doc, sort_keys=True) + "\n")
        return 0
    out.write(f"{'image':<20} {'K':>3} {'ssim_xs':>8} {'ssim_xc':>8} {'psnr_xs':>8} {'psnr_xc':>8} pass\n")
    for name, r in rows:
        out.write(
            f"{name:<20} {r.k:>3} {r.ssim_xs:>8.4f} {r.ssim_xc:>8.4f} "
            f"{r.psnr_xs:>8.2f} {r.psnr_xc:>8.2f} {str(r.passed).lower()}\n"
        )
    for name, ok in verdicts.items():
        out.write(f"monotone[{name}]={str(ok).lower()}\n")
    out.write(f"monotone_all={str(monotone).lower()}\n")
    return 0


# -- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, mode=True) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--k", type=int, help="crucial channels per component (default 10)")
    p.add_argument("--seed", type=int, help="weight seed (default 0)")
    if mode:
        p.add_argument("--mode", choices=sorted(protocol.MODE_NAMES), help="transmission mode (default compact)")
        p.add_argument("--w", type=_floats, help="4 interaction weights, comma separated (default 1,1,1,1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duetface", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("energy-report", help="per-channel energy of an image's frequency tensor")
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_energy_report)

    p = sub.add_parser("split", help="write zero-padded reconstructions of x_s and x_c")
    p.add_argument("--image", required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--spec", help="fixed split spec record instead of ranking this image")
    p.add_argument("--threshold", type=float)
    p.add_argument("--json", action="store_true")
    _common(p, mode=False)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("demo", help="client and server in-process for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--landmarks", help="landmark sidecar (default: <image>.landmarks.txt or a synthetic ellipse)")
    p.add_argument("--spec")
    p.add_argument("--query-id", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--json", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("init-weights", help="write seeded backbone weights to a directory")
    p.add_argument("--out", required=True)
    p.add_argument("--role", choices=("server", "client"), default="server")
    _common(p, mode=False)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("serve", help="answer queries over TCP")
    p.add_argument("--listen", help=f"host:port (default {DEFAULT_LISTEN}; ${LISTEN_ENV} overrides)")
    p.add_argument("--weights", help="weight directory (default: seeded weights)")
    _common(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="send one image to a running server")
    p.add_argument("--image", required=True)
    p.add_argument("--landmarks")
    p.add_argument("--server", required=True, help="host:port")
    p.add_argument("--out", help="write the embedding as a tensor record")
    p.add_argument("--client-weights")
    p.add_argument("--spec")
    p.add_argument("--query-id", type=int)
    _common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval-privacy", help="SSIM/PSNR of x_s and x_c over a corpus and a K sweep")
    p.add_argument("--corpus", help="directory of .ppm images (default: bundled corpus)")
    p.add_argument("--ks", default=",".join(map(str, DEFAULT_K_SWEEP)))
    p.add_argument("--threshold", type=float)
    p.add_argument("--json", action="store_true")
    _common(p, mode=False)
    p.set_defaults(func=cmd_eval_privacy)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"duetface: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, protocol.ProtocolError) as exc:
        print(f"duetface: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
