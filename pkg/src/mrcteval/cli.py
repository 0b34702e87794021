"""Command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage error. Diagnostics go to
stderr; machine output goes to stdout or the --out file. Output bytes are
deterministic for deterministic inputs, independent of --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import archspec, evalbatch, latent, losses, study
from .errors import EvalError
from .imageio import load_image, load_manifest

REPORT_FORMATS = {"md": "markdown", "csv": "csv", "json": "json"}


def _parse_metrics(text: str) -> tuple[str, ...]:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    if not names:
        raise EvalError("no metrics selected")
    return names


def _parse_shape(text: str) -> archspec.TensorShape:
    parts = text.lower().split("x")
    if len(parts) != 3:
        raise EvalError(f"expected CxHxW, got {text!r}")
    try:
        c, h, w = (int(p) for p in parts)
    except ValueError:
        raise EvalError(f"expected integers in CxHxW, got {text!r}") from None
    return archspec.TensorShape(height=h, width=w, channels=c)


def _write_out(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.write(data.decode("utf-8"))
    else:
        with open(out, "wb") as fh:
            fh.write(data)


def _cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    selection = _parse_metrics(args.metrics)
    results, failures = evalbatch.evaluate_manifest(manifest, selection, threads=args.threads)
    evalbatch.write_results(results, failures, args.out)
    print(
        f"evaluated {len(results)} pair(s), {len(failures)} failure(s) -> {args.out}",
        file=sys.stderr,
    )
    return 0 if results or not failures else 1


def _cmd_report(args) -> int:
    results, _ = evalbatch.read_results(getattr(args, "in"))
    rows = evalbatch.aggregate(results)
    fmt = REPORT_FORMATS[args.format]
    body = evalbatch.render_report(rows, fmt)
    if args.rank_by:
        directions = sorted({r.direction for r in rows})
        ranking = {d: evalbatch.rank_models(rows, args.rank_by, d) for d in directions}
        if fmt == "markdown":
            extra = []
            for d in directions:
                extra.append(f"\n## Ranking by {args.rank_by} ({d})\n")
                extra.extend(f"{i}. {m}" for i, m in enumerate(ranking[d], start=1))
                extra.append("")
            body += ("\n".join(extra)).encode("utf-8")
        elif fmt == "csv":
            extra = ["", "ranking_direction,rank,model_id"]
            for d in directions:
                extra.extend(f"{d},{i},{m}" for i, m in enumerate(ranking[d], start=1))
            body += ("\n".join(extra) + "\n").encode("utf-8")
        else:
            payload = {
                "rows": json.loads(body.decode("utf-8")),
                "ranking": {"metric": args.rank_by, **ranking},
            }
            body = (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")
    _write_out(body, args.out)
    return 0


def _cmd_arch_parse(args) -> int:
    role = archspec.Role(args.role)
    spec = archspec.parse_arch(args.spec, role)
    if role is archspec.Role.DISCRIMINATOR and args.c512_stride == 1:
        spec = archspec.with_c512_stride(spec, 1)
    input_shape = _parse_shape(args.input)
    shapes = archspec.shape_trace(spec, input_shape)
    totals = archspec.param_trace(spec, input_shape.channels)
    lines = [f"{'layer':<12} {'output':<16} {'params(cum)':>12}"]
    lines.append(f"{'input':<12} {str(shapes[0]):<16} {0:>12}")
    for layer, shape, total in zip(spec.layers, shapes[1:], totals):
        lines.append(f"{layer.token():<12} {str(shape):<16} {total:>12}")
    lines.append(f"total parameters: {totals[-1] if totals else 0}")
    if role is archspec.Role.DISCRIMINATOR:
        lines.append(f"receptive field: {archspec.receptive_field(spec)}")
    else:
        if input_shape.height == input_shape.width:
            check = archspec.validate_resolution(spec, input_shape.height)
            lines.append(f"resolution rule: {'ok' if check.ok else check.message}")
    print("\n".join(lines))
    return 0


def _cmd_loss_adv(args) -> int:
    batch = losses.DiscriminatorBatch(
        d_real=losses.read_probability_file(args.real),
        d_fake=losses.read_probability_file(args.fake),
    )
    print(f"{losses.adversarial_loss(batch):.10g}")
    return 0


def _cmd_loss_cycle(args) -> int:
    batch = losses.CycleBatch(
        x=load_image(args.x),
        fgx=load_image(args.fgx),
        y=load_image(args.y),
        gfy=load_image(args.gfy),
    )
    print(f"{losses.cycle_consistency_loss(batch):.10g}")
    return 0


def _cmd_loss_lambda(args) -> int:
    print(f"{losses.lambda_for_category(args.category):g}")
    return 0


def _cmd_loss_lr(args) -> int:
    cfg = losses.FinetuneConfig(
        category="",
        lambda_weight=10.0,
        base_learning_rate=args.base,
        total_epochs=args.total,
        decay_start_epoch=args.decay_start,
    )
    print(f"{losses.lr_at_epoch(cfg, args.epoch):.10g}")
    return 0


def _cmd_latent(args) -> int:
    if args.features:
        matrix = latent.read_feature_csv(args.features)
    else:
        import numpy as np

        entries = latent.read_image_list(args.images)
        rows = [latent.extract_features(load_image(path)) for _, path in entries]
        matrix = latent.FeatureMatrix(rows=np.vstack(rows), labels=tuple(l for l, _ in entries))
    projection = latent.pca_fit(matrix)
    points = latent.project(projection, matrix)
    latent.write_coords_csv(points, args.out)
    print(f"projected {len(points.labels)} point(s) -> {args.out}", file=sys.stderr)
    if args.score:
        print(f"{latent.separation_score(points.coords, points.labels):.6f}")
    return 0


def _cmd_study_init(args) -> int:
    entries = study.load_study_manifest(args.manifest)
    session = study.build_session(entries, seed=args.seed, rater_id=args.rater)
    study.save_session(session, args.out)
    print(
        f"session {session.session_id}: {session.total} item(s) -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_study_serve(args) -> int:
    import uvicorn

    from .service import build_service

    app = build_service(
        args.session,
        second_dir=args.second,
        auth_token=args.token,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_study_analyze(args) -> int:
    sessions = [study.load_session(args.session)]
    if args.second:
        sessions.append(study.load_session(args.second))
    body = study.render_study_report(sessions, REPORT_FORMATS[args.format])
    _write_out(body, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrcteval",
        description="Quality metrics, objective audits, and perceptual studies "
        "for bidirectional MR-CT image translation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="compute metrics over a manifest of image pairs")
    p.add_argument("--manifest", required=True, help="pair manifest CSV")
    p.add_argument("--metrics", default="psnr,ssim,uqi,vif", help="comma-separated metric names")
    p.add_argument("--threads", type=int, default=os.cpu_count(), help="worker threads")
    p.add_argument("--out", required=True, help="results file (JSON lines)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="aggregate a results file into a report")
    p.add_argument("--in", required=True, help="results file from `eval`")
    p.add_argument("--format", choices=sorted(REPORT_FORMATS), default="md")
    p.add_argument("--rank-by", choices=evalbatch.METRIC_NAMES, help="append a model ranking")
    p.add_argument("--out", help="write report here instead of stdout")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("arch", help="architecture notation tools")
    arch_sub = p.add_subparsers(dest="arch_command", required=True)
    ap = arch_sub.add_parser("parse", help="parse a notation string and trace shapes")
    ap.add_argument("spec", help="notation string, e.g. 'c7s1-64,d128,d256,R256x9,u128,u64,c7s1-3'")
    ap.add_argument("--role", choices=["generator", "discriminator"], default="generator")
    ap.add_argument("--input", default="3x256x256", help="input shape CxHxW")
    ap.add_argument("--c512-stride", type=int, choices=[1, 2], default=2,
                    help="stride of the last discriminator C stage")
    ap.set_defaults(func=_cmd_arch_parse)

    p = sub.add_parser("loss", help="objective and schedule audits")
    loss_sub = p.add_subparsers(dest="loss_command", required=True)
    lp = loss_sub.add_parser("adv", help="adversarial loss from probability files")
    lp.add_argument("--real", required=True, help="file with one probability per line")
    lp.add_argument("--fake", required=True, help="file with one probability per line")
    lp.set_defaults(func=_cmd_loss_adv)
    lp = loss_sub.add_parser("cycle", help="cycle-consistency loss from four PNGs")
    lp.add_argument("--x", required=True)
    lp.add_argument("--fgx", required=True)
    lp.add_argument("--y", required=True)
    lp.add_argument("--gfy", required=True)
    lp.set_defaults(func=_cmd_loss_cycle)
    lp = loss_sub.add_parser("lambda", help="cycle weight for a donor category")
    lp.add_argument("--category", required=True)
    lp.set_defaults(func=_cmd_loss_lambda)
    lp = loss_sub.add_parser("lr", help="learning rate at an epoch")
    lp.add_argument("--base", type=float, required=True)
    lp.add_argument("--epoch", type=int, required=True)
    lp.add_argument("--total", type=int, default=200)
    lp.add_argument("--decay-start", type=int, default=100)
    lp.set_defaults(func=_cmd_loss_lr)

    p = sub.add_parser("latent", help="project features to 2-D and score separation")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features", help="feature CSV (label,f0,f1,...)")
    src.add_argument("--images", help="image list CSV (label,path)")
    p.add_argument("--out", required=True, help="coordinates CSV (label,x,y)")
    p.add_argument("--score", action="store_true", help="print the silhouette score")
    p.set_defaults(func=_cmd_latent)

    p = sub.add_parser("study", help="blinded perceptual-study tools")
    study_sub = p.add_subparsers(dest="study_command", required=True)
    sp = study_sub.add_parser("init", help="create a randomized session directory")
    sp.add_argument("--manifest", required=True, help="study manifest CSV")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--rater", required=True)
    sp.add_argument("--out", required=True, help="session directory")
    sp.set_defaults(func=_cmd_study_init)
    sp = study_sub.add_parser("serve", help="serve a session over HTTP")
    sp.add_argument("--session", required=True, help="session directory")
    sp.add_argument("--port", type=int, required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--second", help="second rater's session directory")
    sp.add_argument("--token", help="require this bearer token")
    sp.add_argument("--ui", help="serve this directory as the rating UI")
    sp.set_defaults(func=_cmd_study_serve)
    sp = study_sub.add_parser("analyze", help="rating statistics and agreement report")
    sp.add_argument("--session", required=True)
    sp.add_argument("--second", help="second rater's session directory")
    sp.add_argument("--format", choices=sorted(REPORT_FORMATS), default="md")
    sp.add_argument("--out", help="write report here instead of stdout")
    sp.set_defaults(func=_cmd_study_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
