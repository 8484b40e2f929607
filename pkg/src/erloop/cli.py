"""Command-line interface.

Every subcommand builds the same request models the HTTP service consumes.
Without --server the request is handled in-process; with --server it is
POSTed to a running service, so the CLI doubles as a thin API client. Option
precedence for run configuration: command-line flag > --config file > built-in
default.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

from .errors import ConfigError, ErloopError
from .oracle import AnswerSource
from .pipeline import RunConfig, render_curve
from .select import Strategy
from .simgen import InitMode, MissingPolicy, SimFunction
from .service import schemas
from .service.app import (
    handle_bench,
    handle_eval,
    handle_probe,
    handle_run,
    handle_sweep,
    handle_synth,
)

# requests can carry multi-minute benchmark work
_CLIENT_TIMEOUT = httpx.Timeout(600.0, connect=10.0)


class RemoteError(ErloopError):
    """The server rejected or failed to handle a forwarded request."""


def _post(server: str, path: str, payload: dict) -> dict:
    url = server.rstrip("/") + path
    try:
        with httpx.Client(timeout=_CLIENT_TIMEOUT) as client:
            response = client.post(url, json=payload)
    except httpx.HTTPError as exc:
        raise RemoteError(f"cannot reach {url}: {exc}") from None
    if response.status_code >= 400:
        try:
            body = response.json()
        except ValueError:
            body = {}
        error = body.get("error", f"http {response.status_code}")
        detail = body.get("detail", response.text[:500])
        raise RemoteError(f"{error}: {detail}")
    return response.json()


def _print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _read_file(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ErloopError(f"cannot read {path}: {exc}") from None


def _write_file(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# flag parsing helpers


def _parse_thresholds(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty threshold list")
    return values


def _parse_seeds(text: str) -> list[int]:
    """Comma-separated seeds; 'a..b' spans an inclusive range."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo_text, hi_text = part.split("..", 1)
                lo, hi = int(lo_text), int(hi_text)
                if hi < lo:
                    raise argparse.ArgumentTypeError(f"descending seed range {part!r}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def _parse_strategies(text: str) -> list[str]:
    allowed = {s.value for s in Strategy}
    values = [part.strip() for part in text.split(",") if part.strip()]
    for value in values:
        if value not in allowed:
            raise argparse.ArgumentTypeError(f"unknown strategy {value!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty strategy list")
    return values


# (argparse dest, config key) pairs for flags that override config entries
_CONFIG_FLAG_KEYS = (
    ("budget", "budget"),
    ("k", "k"),
    ("d", "d"),
    ("strategy", "strategy"),
    ("theta", "theta"),
    ("oracle", "oracle"),
    ("init", "init"),
    ("thresholds", "thresholds"),
    ("seed", "seed"),
    ("sim_function", "sim_function"),
    ("missing_policy", "missing_policy"),
    ("entities", "synth_entities"),
    ("dup_rate", "synth_dup_rate"),
    ("records", "records"),
    ("truth", "truth"),
    ("out", "out"),
)


def _add_config_flags(parser: argparse.ArgumentParser, *, dataset: bool = True) -> None:
    if dataset:
        parser.add_argument("--records", help="records CSV file (id column first)")
        parser.add_argument("--truth", help="truth CSV file (two id columns, no header)")
        parser.add_argument("--entities", type=int, help="synthesize a corpus of this many entities instead of reading --records")
        parser.add_argument("--dup-rate", type=float, dest="dup_rate", help="per-entity duplicate probability for --entities")
    parser.add_argument("--config", help="JSON file with run options; flags override it")
    parser.add_argument("--budget", type=int, help="token budget")
    parser.add_argument("--k", type=int, help="questions per iteration")
    parser.add_argument("--d", type=int, help="partial-enumeration seed size")
    parser.add_argument("--strategy", choices=[s.value for s in Strategy], help="question selection strategy")
    parser.add_argument("--theta", type=float, help="oracle capability in [0, 1]")
    parser.add_argument("--oracle", choices=[s.value for s in AnswerSource], help="answer source")
    parser.add_argument("--init", choices=[m.value for m in InitMode], help="initial distribution over swept partitions")
    parser.add_argument("--thresholds", type=_parse_thresholds, help="comma-separated ascending similarity thresholds")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--sim-function", choices=[f.value for f in SimFunction], dest="sim_function", help="attribute similarity function")
    parser.add_argument("--missing-policy", choices=[p.value for p in MissingPolicy], dest="missing_policy", help="how absent attribute values compare")


def _merged_config(args: argparse.Namespace) -> dict:
    """Config-file entries overlaid with explicitly set flags, then validated."""
    merged: dict = {}
    if getattr(args, "config", None):
        text = _read_file(args.config)
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {args.config} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {args.config} must hold a JSON object")
        merged.update(loaded)
    for dest, key in _CONFIG_FLAG_KEYS:
        value = getattr(args, dest, None)
        if value is not None:
            merged[key] = value
    RunConfig.from_mapping(merged)  # reject unknown keys and bad values early
    return merged


def _dataset_csvs(config: dict) -> tuple[str | None, str | None]:
    """Read the configured records/truth files so they travel as text."""
    records_csv = _read_file(config["records"]) if config.get("records") else None
    truth_csv = _read_file(config["truth"]) if config.get("truth") else None
    return records_csv, truth_csv


# ---------------------------------------------------------------------------
# subcommands


def _sweep_command(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    cfg = RunConfig.from_mapping(config)
    if not config.get("records"):
        raise ConfigError("sweep needs --records")
    request = schemas.SweepRequest(
        records_csv=_read_file(config["records"]),
        sim_function=cfg.sim_function.value,
        thresholds=list(cfg.thresholds),
        missing_policy=cfg.missing_policy.value,
        init=cfg.init.value,
        seed=cfg.seed,
    )
    if args.server:
        response = schemas.SweepResponse.model_validate(
            _post(args.server, "/sweep", request.model_dump(mode="json"))
        )
    else:
        response = handle_sweep(request)

    summary = {
        "entropy_bits": response.entropy_bits,
        "n_partitions": response.n_partitions,
        "n_records": response.n_records,
    }
    if args.out:
        _write_file(
            Path(args.out),
            json.dumps(response.result_set.model_dump(), indent=2, sort_keys=True) + "\n",
        )
        summary["result_set"] = args.out
        _print_json(summary)
    else:
        summary["result_set"] = response.result_set.model_dump()
        _print_json(summary)
    return 0


def _write_run_outputs(out_dir: Path, response: schemas.RunResponse) -> dict:
    _write_file(out_dir / "curve.csv", response.curve_csv)
    _write_file(
        out_dir / "curve.manifest.json",
        json.dumps(response.manifest, indent=2, sort_keys=True) + "\n",
    )
    _write_file(
        out_dir / "result_set.json",
        json.dumps(response.result_set.model_dump(), indent=2, sort_keys=True) + "\n",
    )
    return {
        "curve": str(out_dir / "curve.csv"),
        "manifest": str(out_dir / "curve.manifest.json"),
        "result_set": str(out_dir / "result_set.json"),
    }


def _run_command(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    records_csv, truth_csv = _dataset_csvs(config)
    out_dir = Path(config.get("out") or "out")
    request = schemas.RunRequest(config=config, records_csv=records_csv, truth_csv=truth_csv)
    try:
        if args.server:
            response = schemas.RunResponse.model_validate(
                _post(args.server, "/run", request.model_dump(mode="json"))
            )
        else:
            response = handle_run(request)
    except ErloopError as exc:
        # salvage whatever iterations completed before the oracle failed
        partial = getattr(exc, "partial_logs", None)
        if partial is not None:
            partial_path = out_dir / "curve.partial.csv"
            _write_file(partial_path, render_curve(partial))
            print(f"wrote {len(partial)} completed iterations to {partial_path}", file=sys.stderr)
        raise

    files = _write_run_outputs(out_dir, response)
    payload = response.summary.model_dump()
    payload["files"] = files
    _print_json(payload)
    return 0


def _eval_command(args: argparse.Namespace) -> int:
    text = _read_file(args.result_set)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ErloopError(f"result set file {args.result_set} is not valid JSON: {exc}") from None
    request = schemas.EvalRequest(
        result_set=schemas.ResultSetModel.model_validate(obj),
        truth_csv=_read_file(args.truth),
        records_csv=_read_file(args.records) if args.records else None,
    )
    if args.server:
        response = schemas.EvalResponse.model_validate(
            _post(args.server, "/eval", request.model_dump(mode="json"))
        )
    else:
        response = handle_eval(request)
    _print_json(response.model_dump())
    return 0


def _probe_command(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    if not config.get("records") or not config.get("truth"):
        raise ConfigError("probe needs --records and --truth")
    records_csv, truth_csv = _dataset_csvs(config)
    request = schemas.ProbeRequest(
        records_csv=records_csv,
        truth_csv=truth_csv,
        n=args.n,
        config=config,
    )
    if args.server:
        response = schemas.ProbeResponse.model_validate(
            _post(args.server, "/probe", request.model_dump(mode="json"))
        )
    else:
        response = handle_probe(request)
    _print_json(response.model_dump())
    return 0


def _synth_command(args: argparse.Namespace) -> int:
    request = schemas.SynthRequest(
        entities=args.entities,
        dup_rate=args.dup_rate,
        typo_rate=args.typo_rate,
        abbrev_rate=args.abbrev_rate,
        drop_rate=args.drop_rate,
        max_extra_copies=args.max_extra_copies,
        seed=args.seed,
    )
    if args.server:
        response = schemas.SynthResponse.model_validate(
            _post(args.server, "/synth", request.model_dump(mode="json"))
        )
    else:
        response = handle_synth(request)

    out_dir = Path(args.out)
    records_path = out_dir / "records.csv"
    truth_path = out_dir / "truth.csv"
    _write_file(records_path, response.records_csv)
    _write_file(truth_path, response.truth_csv)
    _print_json(
        {
            "n_records": response.n_records,
            "n_truth_pairs": response.n_truth_pairs,
            "records": str(records_path),
            "truth": str(truth_path),
        }
    )
    return 0


def _bench_command(args: argparse.Namespace) -> int:
    config = _merged_config(args)
    records_csv, truth_csv = _dataset_csvs(config)
    request = schemas.BenchRequest(
        config=config,
        seeds=args.seeds,
        strategies=args.strategies,
        records_csv=records_csv,
        truth_csv=truth_csv,
    )
    if args.server:
        response = schemas.BenchResponse.model_validate(
            _post(args.server, "/bench", request.model_dump(mode="json"))
        )
    else:
        response = handle_bench(request)

    summary: dict = {
        "runs": len(response.runs),
        "seeds": len(args.seeds),
        "strategies": args.strategies,
        "mean_final_entropy": response.mean_final_entropy,
    }
    if args.out:
        _write_file(
            Path(args.out),
            json.dumps(response.model_dump(), indent=2, sort_keys=True) + "\n",
        )
        summary["report"] = args.out
    _print_json(summary)
    return 0


def _serve_command(args: argparse.Namespace) -> int:
    if args.server:
        raise ConfigError("serve starts a local server; --server does not apply")
    import uvicorn

    uvicorn.run("erloop.service:app", host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erloop",
        description="Budgeted refinement of entity-resolution results via oracle matching questions",
    )
    parser.add_argument("--server", help="base URL of a running service; forwards the command instead of executing in-process")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress details")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sweep = subparsers.add_parser("sweep", help="emit the initial partitions and distribution for a dataset")
    _add_config_flags(sweep)
    sweep.add_argument("--out", help="write the result set JSON here instead of stdout")
    sweep.set_defaults(func=_sweep_command)

    run = subparsers.add_parser("run", help="run the full select/ask/update loop")
    _add_config_flags(run)
    run.add_argument("--out", help="output directory for curve, manifest, and result set (default: out)")
    run.set_defaults(func=_run_command)

    eval_ = subparsers.add_parser("eval", help="score a stored result set against ground truth")
    eval_.add_argument("--result-set", required=True, dest="result_set", help="result set JSON written by run or sweep")
    eval_.add_argument("--truth", required=True, help="truth CSV file")
    eval_.add_argument("--records", help="records CSV file, to validate truth ids")
    eval_.set_defaults(func=_eval_command)

    probe = subparsers.add_parser("probe", help="estimate oracle capability from labeled pairs")
    _add_config_flags(probe)
    probe.add_argument("--n", type=int, default=100, help="number of probe questions")
    probe.set_defaults(func=_probe_command)

    synth = subparsers.add_parser("synth", help="generate a synthetic corpus with ground truth")
    synth.add_argument("--entities", type=int, required=True, help="number of distinct entities")
    synth.add_argument("--dup-rate", type=float, default=0.4, dest="dup_rate", help="per-entity duplicate probability")
    synth.add_argument("--typo-rate", type=float, default=0.3, dest="typo_rate", help="per-attribute typo probability")
    synth.add_argument("--abbrev-rate", type=float, default=0.2, dest="abbrev_rate", help="per-attribute abbreviation probability")
    synth.add_argument("--drop-rate", type=float, default=0.1, dest="drop_rate", help="per-attribute drop probability")
    synth.add_argument("--max-extra-copies", type=int, default=3, dest="max_extra_copies", help="most duplicates one entity may gain")
    synth.add_argument("--seed", type=int, default=0, help="generation seed")
    synth.add_argument("--out", default="out", help="output directory for records.csv and truth.csv")
    synth.set_defaults(func=_synth_command)

    bench = subparsers.add_parser("bench", help="compare selection strategies across seeds")
    _add_config_flags(bench)
    bench.add_argument("--seeds", type=_parse_seeds, required=True, help="comma-separated seeds; a..b spans a range")
    bench.add_argument("--strategies", type=_parse_strategies, default=["greedy", "random"], help="comma-separated strategies to compare")
    bench.add_argument("--out", help="write the full per-run report JSON here")
    bench.set_defaults(func=_bench_command)

    serve = subparsers.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1", help="bind address")
    serve.add_argument("--port", type=int, default=8000, help="bind port")
    serve.set_defaults(func=_serve_command)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    command: Callable[[argparse.Namespace], int] = args.func
    try:
        return command(args)
    # core validation raises plain ValueError; report it like any other
    # bad-input failure instead of tracebacking
    except (ErloopError, ValueError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
