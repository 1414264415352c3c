"""Operator command line: run the server, run simulations, fit and query the
battery model, export tracks. Subcommands are thin adapters over the core
modules; machine-readable output goes to stdout, diagnostics to stderr."""

from __future__ import annotations

import argparse
import json
import sys

from .energy import (
    BatteryModel,
    fit_battery_model,
    predict_lifetime,
    predict_lifetime_for_schedule,
)
from .errors import SmsTrackError
from .pipeline import PositionPipeline
from .registry import DeviceRegistry, Device
from .scheduling import schedule_from_record
from .simulator import ScenarioConfig, run_scenario
from .store import Store
from .timeutil import parse_ts

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _parse_points(text: str) -> list[tuple[float, float]]:
    points = []
    for chunk in text.split(","):
        interval, sep, lifetime = chunk.partition(":")
        if not sep:
            raise SmsTrackError(
                f"points must be interval:lifetime pairs, got {chunk!r}")
        points.append((float(interval), float(lifetime)))
    return points


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app
    from .service.config import load_config
    from .service.runtime import ServerRuntime

    config = load_config(args.config)
    runtime = ServerRuntime(config)
    app = create_app(runtime, run_loop=True)
    print(f"serving on http://{config.listen_host}:{config.listen_port} "
          f"(store: {config.store_path}, transport: {config.transport})",
          file=sys.stderr)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port,
                log_level="warning")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = ScenarioConfig.load(args.scenario)
    if args.seed is not None:
        config.seed = args.seed
    result = run_scenario(config, args.out)
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_fit_battery(args) -> int:
    points = _parse_points(args.points)
    model = fit_battery_model(points, args.capacity)
    if args.out:
        model.save(args.out)
        print(f"model written to {args.out}", file=sys.stderr)
    report = {
        "model": model.to_dict(),
        "reproduced": {
            f"{interval:g}": round(predict_lifetime(model, interval), 3)
            for interval, _ in points},
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_predict_lifetime(args) -> int:
    model = BatteryModel.load(args.model)
    if args.interval is None and args.schedule is None:
        print("predict-lifetime requires --interval or --schedule", file=sys.stderr)
        return EXIT_USAGE
    if args.interval is not None:
        minutes = predict_lifetime(model, args.interval)
    else:
        with open(args.schedule, encoding="utf-8") as fh:
            record = json.load(fh)
        record.setdefault("schedule_id", "cli")
        record.setdefault("starts_at", "2024-01-01T00:00:00+00:00")
        schedule = schedule_from_record(record)
        schedule.validate()
        minutes = predict_lifetime_for_schedule(model, schedule)
    print(f"{minutes:.1f}")
    return EXIT_OK


def cmd_export(args) -> int:
    store = Store(args.store)
    try:
        registry = DeviceRegistry()
        for rec in store.scan("devices"):
            device = Device.from_record(rec)
            registry.register_device(
                imei=device.imei, phone_number=device.phone_number,
                password=device.password,
                battery_capacity_mah=device.battery_capacity_mah,
                label=device.label, device_id=device.device_id)
        pipeline = PositionPipeline(store, registry)
        doc = pipeline.export_track(args.device, parse_ts(getattr(args, "from")),
                                    parse_ts(args.to), args.format)
        sys.stdout.write(doc)
        if not doc.endswith("\n"):
            sys.stdout.write("\n")
    finally:
        store.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smstrack",
        description="SMS-only GPS fleet tracking: server, simulator, "
                    "battery model and track export tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the tracking server")
    p_serve.add_argument("--config", required=True, help="server config file")
    p_serve.set_defaults(func=cmd_serve)

    p_sim = sub.add_parser("simulate", help="run a virtual fleet scenario")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON file")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit-battery", help="fit the battery model to "
                                               "measured lifetimes")
    p_fit.add_argument("--points", required=True,
                       help="comma list of interval:lifetime minutes, "
                            "e.g. 1:715,20:3637")
    p_fit.add_argument("--capacity", type=float, required=True,
                       help="battery capacity in mAh")
    p_fit.add_argument("--out", help="write the fitted model JSON here")
    p_fit.set_defaults(func=cmd_fit_battery)

    p_pred = sub.add_parser("predict-lifetime",
                            help="predict locator lifetime from a model file")
    p_pred.add_argument("--model", required=True, help="model JSON file")
    p_pred.add_argument("--interval", type=float,
                        help="fixed query interval in minutes")
    p_pred.add_argument("--schedule", help="schedule JSON file")
    p_pred.set_defaults(func=cmd_predict_lifetime)

    p_exp = sub.add_parser("export", help="export a stored track")
    p_exp.add_argument("--store", required=True, help="store directory")
    p_exp.add_argument("--device", required=True, help="device id")
    p_exp.add_argument("--from", required=True, help="range start (ISO-8601)")
    p_exp.add_argument("--to", required=True, help="range end (ISO-8601)")
    p_exp.add_argument("--format", choices=["csv", "geojson"], default="csv")
    p_exp.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SmsTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
