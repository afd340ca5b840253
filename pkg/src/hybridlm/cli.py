"""Command-line front end: calibrate, simulate, sweep, verify, report.

Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 I/O error. All outputs are reproducible for a fixed config and seed;
wall-clock timestamps appear only in a header line (CSV) or a dedicated
``generated_at`` field (JSON), never in record streams.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from .compression import load_utv_table, save_utv_table
from .config import RunConfig, load_config
from .oracle import CalibrationSet, calibrate
from .pipeline import RECORD_FIELDS, RoundRecord, metrics, run_many
from .uncertainty import (
    LinearRejectionModel,
    load_calibration_pairs,
    save_calibration_pairs,
)
from .verification import run_all_suites

SWEEP_AXES = {
    "snr_db": ("channel", "mean_snr_db", float),
    "u_th": ("policy", "u_th", float),
    "theta": ("policy", "theta", float),
    "k": ("policy", "k_star", int),
}

SWEEP_COLUMNS = [
    "fading",
    "axis",
    "value",
    "n_rounds",
    "tr",
    "tsr",
    "mean_bias",
    "mean_throughput_tokens_per_s",
    "mean_k",
    "mean_payload_bits",
    "acceptance_rate_given_tx",
]


class _Parser(argparse.ArgumentParser):
    # Usage mistakes are configuration errors (exit 1), not verification
    # failures (exit 2, argparse's default).
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_records(records: list[RoundRecord], path: Path, fmt: str) -> None:
    if fmt == "jsonl":
        with open(path, "w") as fh:
            for r in records:
                fh.write(r.to_json() + "\n")
    else:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RECORD_FIELDS)
            for r in records:
                d = r.to_dict()
                writer.writerow([_fmt(d[k]) for k in RECORD_FIELDS])


def _read_records(path: Path) -> list[RoundRecord]:
    records = []
    if path.suffix == ".csv":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                records.append(_record_from_strings(row))
    else:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    records.append(RoundRecord(**json.loads(line)))
    return records


def _record_from_strings(row: dict) -> RoundRecord:
    def opt(key, conv):
        v = row.get(key, "")
        return None if v == "" else conv(v)

    return RoundRecord(
        seq=int(row["seq"]),
        round=int(row["round"]),
        u=opt("u", float),
        delta=int(row["delta"]),
        k_used=opt("k_used", int),
        payload_bits=int(row["payload_bits"]),
        snr_linear=opt("snr_linear", float),
        tau_comm_s=float(row["tau_comm_s"]),
        verdict=row["verdict"],
        fallback_used=bool(int(row["fallback_used"])),
        bias=opt("bias", float),
        tvd_pq=opt("tvd_pq", float),
        bound_at_selection=opt("bound_at_selection", float),
        token=int(row["token"]),
        latency_s=float(row["latency_s"]),
        counterfactual_accept=(
            None
            if row.get("counterfactual_accept", "") == ""
            else bool(int(row["counterfactual_accept"]))
        ),
        eos=bool(int(row["eos"])),
    )


def save_calibration(out: Path, cal: CalibrationSet) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_calibration_pairs(out / "calibration_pairs.csv", cal.rows)
    save_utv_table(out / "utv_table.csv", cal.utv_k_grid, cal.utv_values)
    model = {
        "a": cal.model.a,
        "b": cal.model.b,
        "mse": cal.model.mse,
        "r2": cal.model.r2,
        "delta_hat": cal.delta_hat,
    }
    with open(out / "model.json", "w") as fh:
        json.dump(model, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_calibration(path: Path) -> CalibrationSet:
    with open(path / "model.json") as fh:
        m = json.load(fh)
    k_grid, values = load_utv_table(path / "utv_table.csv")
    pairs_path = path / "calibration_pairs.csv"
    rows = load_calibration_pairs(pairs_path) if pairs_path.exists() else []
    return CalibrationSet(
        pairs=[(r[0], r[1]) for r in rows],
        rows=rows,
        delta_hat=m["delta_hat"],
        utv_k_grid=k_grid,
        utv_values=values,
        model=LinearRejectionModel(a=m["a"], b=m["b"], mse=m["mse"], r2=m["r2"]),
    )


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    n_rounds = args.rounds or cfg.calibration.n_rounds
    cal_seed = cfg.calibration.seed if cfg.calibration.seed is not None else cfg.seed + 1
    cal = calibrate(
        cfg.oracle,
        n_rounds,
        cfg.uncertainty,
        seed=cal_seed,
        delta_u_gate=cfg.calibration.delta_u_gate,
    )
    out = Path(args.out)
    save_calibration(out, cal)
    print(
        f"calibrated {n_rounds} rounds: a={cal.model.a:.4f} b={cal.model.b:.4f} "
        f"r2={cal.model.r2:.4f} delta={cal.delta_hat:.4f} -> {out}"
    )
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    calib = load_calibration(Path(args.calib)) if args.calib else None
    transcript: list[bytes] | None = [] if args.transcript else None
    report, records = run_many(cfg, calib=calib, transcript=transcript)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_records(records, out / f"records.{args.format}", args.format)
    with open(out / "report.json", "w") as fh:
        json.dump(
            {
                "generated_at": _timestamp(),
                "config": cfg.to_dict(),
                "report": report.to_dict(),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    if transcript is not None:
        with open(out / "transcript.bin", "wb") as fh:
            fh.write(b"".join(transcript))
    print(
        f"simulated {report.n_rounds} rounds: TR={report.tr:.3f} "
        f"throughput={report.mean_throughput_tokens_per_s:.2f} tok/s -> {out}"
    )
    return 0


def _sweep_point(payload) -> dict:
    cfg_dict, fading, axis, value, calib = payload
    cfg = RunConfig.from_dict(cfg_dict)
    cfg = dataclasses.replace(
        cfg, channel=dataclasses.replace(cfg.channel, fading=fading)
    )
    section, field, conv = SWEEP_AXES[axis]
    part = dataclasses.replace(getattr(cfg, section), **{field: conv(value)})
    cfg = dataclasses.replace(cfg, **{section: part})
    report, _ = run_many(cfg, calib=calib)
    row = {"fading": fading, "axis": axis, "value": value}
    row.update(report.to_dict())
    return row


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {args.axis!r}")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValueError("sweep needs at least one value")
    fadings = [f.strip() for f in (args.fading or cfg.channel.fading).split(",")]
    calib = load_calibration(Path(args.calib)) if args.calib else None
    if calib is None and cfg.policy.variant in ("cu_hlm_online", "cu_hlm_offline"):
        from .pipeline import ensure_calibration

        calib = ensure_calibration(cfg, None)

    points = [
        (cfg.to_dict(), fading, args.axis, value, calib)
        for fading in fadings
        for value in values
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(p) for p in points]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# generated_at {_timestamp()}\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    print(f"swept {len(rows)} grid points -> {path}")
    return 0


def cmd_verify(args) -> int:
    cfg = _load(args)  # validates the config even though suites are config-free
    del cfg
    if args.cases < 1:
        raise ValueError("verification needs --cases >= 1")
    results = run_all_suites(args.cases, seed=args.seed or 0, bound_scale=args.debug_scale_bound)
    for res in results:
        print(res.line())
    if any(not r.passed for r in results):
        return 2
    return 0


def cmd_report(args) -> int:
    records = _read_records(Path(args.records))
    report = metrics(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(
            {"generated_at": _timestamp(), "report": report.to_dict()},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"aggregated {report.n_rounds} rounds -> {out / 'report.json'}")
    return 0


def _load(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="hybridlm",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override run seed")
        p.add_argument("--out", type=str, default="out", help="output directory")

    p = sub.add_parser("calibrate", help="fit the uncertainty-rejection line and bound table")
    common(p)
    p.add_argument("--rounds", type=int, default=None, help="calibration rounds")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="run sequences and write records + report")
    common(p)
    p.add_argument("--calib", type=str, default=None, help="calibration directory")
    p.add_argument(
        "--format",
        choices=("csv", "jsonl"),
        default="jsonl",
        help="record stream format; CSV columns: " + ",".join(RECORD_FIELDS),
    )
    p.add_argument(
        "--transcript", action="store_true", help="also write the byte-exact wire transcript"
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser(
        "sweep",
        help="grid runs over one axis times fading kinds",
        description="CSV columns, in order: " + ",".join(SWEEP_COLUMNS),
    )
    common(p)
    p.add_argument("--axis", type=str, required=True, help=f"one of {tuple(SWEEP_AXES)}")
    p.add_argument("--values", type=str, required=True, help="comma-separated axis values")
    p.add_argument("--fading", type=str, default=None, help="comma-separated fading kinds")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--calib", type=str, default=None, help="calibration directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the analytic self-check suites")
    common(p)
    p.add_argument("--cases", type=int, default=1000, help="cases per suite")
    p.add_argument(
        "--debug-scale-bound",
        type=float,
        default=1.0,
        help=argparse.SUPPRESS,  # negative-control hook: deliberately scales bounds
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="aggregate a record stream into a report")
    common(p)
    p.add_argument("--records", type=str, required=True, help="records.jsonl or .csv")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as e:
        if e.code in (None, 0):
            return 0
        print(e, file=sys.stderr)
        return 1
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
