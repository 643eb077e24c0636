"""Operator CLI: generate topologies, run sessions, score recorded
transcripts, and sweep selection parameters."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .comm_graph import build_topology, load_graph, save_graph
from .errors import CtxRadarError, SessionError
from .harness import load_session_config, run_session, save_session_outputs
from .radar_select import (
    DecayParams,
    HashingEncoder,
    RemoteEncoder,
    SentenceEncoder,
    select_context,
    selection_json,
)
from .transcript import load_transcript, context_pool


def _encoder_from_args(args) -> SentenceEncoder:
    if args.encoder == "hashing":
        return HashingEncoder(dim=args.encoder_dim)
    if args.encoder == "remote":
        import os

        from .harness import API_KEY_ENV

        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise CtxRadarError(f"remote encoder requires the {API_KEY_ENV} environment variable")
        if not args.encoder_url or not args.encoder_model:
            raise CtxRadarError("remote encoder requires --encoder-url and --encoder-model")
        return RemoteEncoder(
            base_url=args.encoder_url,
            model=args.encoder_model,
            dim=args.encoder_dim,
            api_key=api_key,
        )
    raise CtxRadarError(f"unknown encoder {args.encoder!r}")


def _params_from_args(args) -> DecayParams:
    return DecayParams(
        lambda_s=args.lambda_s,
        lambda_t=args.lambda_t,
        theta=args.theta,
        disable_spatial=args.no_spatial,
        disable_temporal=args.no_temporal,
        matcher=args.matcher,
    )


def _add_selection_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda-s", type=float, default=0.92, dest="lambda_s")
    parser.add_argument("--lambda-t", type=float, default=0.92, dest="lambda_t")
    parser.add_argument("--theta", type=float, default=0.65)
    parser.add_argument("--no-spatial", action="store_true", help="force phi_s = 1")
    parser.add_argument("--no-temporal", action="store_true", help="force phi_t = 1")
    parser.add_argument("--matcher", choices=["dense", "bm25"], default="dense")
    parser.add_argument("--encoder", choices=["hashing", "remote"], default="hashing")
    parser.add_argument("--encoder-dim", type=int, default=256)
    parser.add_argument("--encoder-url", default=None)
    parser.add_argument("--encoder-model", default=None)


def cmd_topology(args) -> int:
    layers = args.layers
    graph = build_topology(args.kind, args.n, p=args.p, layers=layers, seed=args.seed)
    save_graph(graph, args.out)
    print(f"wrote {args.out}: kind={graph.kind.value} n={graph.n_agents} edges={len(graph.edges)}")
    return 0


def cmd_run(args) -> int:
    config, backend = load_session_config(args.config, backend_kind=args.backend)
    try:
        result = run_session(config, backend)
    except SessionError as exc:
        # Preserve the valid prefix so the run stays replayable.
        from .harness import SessionResult

        partial = SessionResult(store=exc.store, audit=exc.audit, final_answer="")
        save_session_outputs(partial, args.out)
        print(f"error: {exc} (partial transcript written to {args.out})", file=sys.stderr)
        return 1
    paths = save_session_outputs(result, args.out)
    for path in paths:
        print(f"wrote {path}")
    print(f"final answer: {result.final_answer}")
    return 0


def cmd_select(args) -> int:
    store = load_transcript(args.transcript)
    graph = load_graph(args.graph)
    params = _params_from_args(args)
    encoder = _encoder_from_args(args)
    pool = context_pool(store, graph, args.receiver, args.t)
    selected = select_context(pool, graph, args.query, args.t, params, encoder)
    payload = selection_json(selected, args.receiver, args.t)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"wrote {args.out}: {len(selected.anchors)} anchors")
    else:
        sys.stdout.write(payload)
    return 0


def _parse_grid(raw: str, name: str) -> list[float]:
    try:
        values = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as exc:
        raise CtxRadarError(f"invalid {name} grid {raw!r}: {exc}") from exc
    if not values:
        raise CtxRadarError(f"{name} grid is empty")
    return values


def cmd_sweep(args) -> int:
    store = load_transcript(args.transcript)
    graph = load_graph(args.graph)
    encoder = _encoder_from_args(args)
    t = args.t if args.t is not None else max((m.round for m in store.messages()), default=0) + 1
    pool = context_pool(store, graph, args.receiver, t)

    grid_s = _parse_grid(args.lambda_s_grid, "lambda-s")
    grid_t = _parse_grid(args.lambda_t_grid, "lambda-t")
    grid_theta = _parse_grid(args.theta_grid, "theta")

    def anchor_ids(params: DecayParams) -> frozenset:
        selected = select_context(pool, graph, args.query, t, params, encoder)
        return frozenset(
            (a.sentence.message_id, a.sentence.start, a.sentence.end) for a in selected.anchors
        )

    baseline = anchor_ids(DecayParams(matcher=args.matcher))
    rows: list[dict] = []
    for lam_s in grid_s:
        for lam_t in grid_t:
            previous_count: int | None = None
            for theta in sorted(grid_theta):
                params = DecayParams(
                    lambda_s=lam_s, lambda_t=lam_t, theta=theta, matcher=args.matcher
                )
                anchors = anchor_ids(params)
                union = anchors | baseline
                jaccard = len(anchors & baseline) / len(union) if union else 1.0
                if previous_count is not None and len(anchors) > previous_count:
                    raise CtxRadarError(
                        f"anchor count increased with theta at lambda_s={lam_s}, "
                        f"lambda_t={lam_t}: {previous_count} -> {len(anchors)}"
                    )
                previous_count = len(anchors)
                rows.append(
                    {
                        "lambda_s": lam_s,
                        "lambda_t": lam_t,
                        "theta": theta,
                        "anchors": len(anchors),
                        "jaccard_vs_default": jaccard,
                    }
                )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(
            f"# transcript={args.transcript} graph={args.graph} receiver={args.receiver} "
            f"t={t} query={json.dumps(args.query, ensure_ascii=False)} matcher={args.matcher} "
            f"encoder={args.encoder}\n"
        )
        fh.write("lambda_s\tlambda_t\ttheta\tanchors\tjaccard_vs_default\n")
        for row in rows:
            fh.write(
                f"{row['lambda_s']:g}\t{row['lambda_t']:g}\t{row['theta']:g}\t"
                f"{row['anchors']}\t{row['jaccard_vs_default']:.6f}\n"
            )
    print(f"wrote {out}: {len(rows)} grid cells")

    if not args.no_figures:
        from .figures import render_sweep_figures

        for path in render_sweep_figures(rows, out.parent):
            print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctxradar")
    sub = parser.add_subparsers(dest="command", required=True)

    p_topo = sub.add_parser("topology", help="generate a communication graph file")
    p_topo.add_argument("--kind", required=True, choices=["fully_connected", "random", "layered", "debate"])
    p_topo.add_argument("--n", type=int, required=True, help="number of agents")
    p_topo.add_argument("--p", type=float, default=0.5, help="edge probability (random)")
    p_topo.add_argument("--layers", type=int, default=None, help="layer count (layered)")
    p_topo.add_argument("--seed", type=int, default=0)
    p_topo.add_argument("--out", required=True)
    p_topo.set_defaults(func=cmd_topology)

    p_run = sub.add_parser("run", help="run a session from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--backend", choices=["scripted", "remote"], default=None)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_select = sub.add_parser("select", help="select context over a recorded transcript")
    p_select.add_argument("--transcript", required=True)
    p_select.add_argument("--graph", required=True)
    p_select.add_argument("--receiver", type=int, required=True)
    p_select.add_argument("--t", type=int, required=True)
    p_select.add_argument("--query", required=True)
    _add_selection_flags(p_select)
    p_select.add_argument("--out", default=None)
    p_select.set_defaults(func=cmd_select)

    p_sweep = sub.add_parser("sweep", help="grid-sweep selection parameters over a transcript")
    p_sweep.add_argument("--transcript", required=True)
    p_sweep.add_argument("--graph", required=True)
    p_sweep.add_argument("--receiver", type=int, default=0)
    p_sweep.add_argument("--t", type=int, default=None, help="default: last round + 1")
    p_sweep.add_argument("--query", required=True)
    p_sweep.add_argument("--lambda-s", dest="lambda_s_grid", default="0.92", help="comma-separated values")
    p_sweep.add_argument("--lambda-t", dest="lambda_t_grid", default="0.92", help="comma-separated values")
    p_sweep.add_argument("--theta", dest="theta_grid", default="0.65", help="comma-separated values")
    p_sweep.add_argument("--matcher", choices=["dense", "bm25"], default="dense")
    p_sweep.add_argument("--encoder", choices=["hashing", "remote"], default="hashing")
    p_sweep.add_argument("--encoder-dim", type=int, default=256)
    p_sweep.add_argument("--encoder-url", default=None)
    p_sweep.add_argument("--encoder-model", default=None)
    p_sweep.add_argument("--out", required=True, help="TSV path")
    p_sweep.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CtxRadarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
