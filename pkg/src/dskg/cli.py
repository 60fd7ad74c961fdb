"""Command-line front-end: ``dskg COMMAND [--config PATH] [--out DIR] [--threads N] [--seed N]``.

Writes ``COMMAND.json`` (summary plus the full resolved config) and, when the
command produces a series, ``COMMAND.csv``. Exit codes: 0 success, 2 invalid
input, 3 numerical failure.
"""

import argparse
import json
import math
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")
_COMMANDS = ("geometry", "assemble", "spectrum", "resonance-scan", "evolve", "superradiance", "scatter", "selftest")


def _fmt_float(v):
    if not math.isfinite(v):
        return "null"
    s = "%.17g" % v
    return s if any(c in s for c in ".en") else s + ".0"


def _plain(obj):
    """Convert numpy scalars/arrays and complex numbers to JSON-friendly Python objects."""
    if hasattr(obj, "tolist") and not isinstance(obj, (str, bytes)):
        obj = obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def dumps(obj, indent=0):
    """Deterministic JSON with sorted keys and 17 significant digits for floats."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else _fmt_float(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_csv_cell(_plain(v)) for v in r) + "\n")


def write_json(path, obj):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(dumps(_plain(obj)) + "\n")


def _parser():
    p = argparse.ArgumentParser(prog="dskg", description="Klein-Gordon fields on De Sitter Kerr backgrounds.")
    p.add_argument("command", choices=_COMMANDS)
    p.add_argument("--config", help="JSON document with run parameters")
    p.add_argument("--out", default="dskg-out", help="output directory (default: %(default)s)")
    p.add_argument("--threads", type=int, default=1, help="BLAS/OpenMP thread cap (default: %(default)s)")
    p.add_argument("--seed", type=int, default=None, help="seed for random data")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("dskg: --threads must be positive", file=sys.stderr)
        return 2
    for var in _THREAD_VARS:
        os.environ[var] = str(args.threads)

    # numerical imports only after the thread caps are in place
    from .commands import RUNNERS, build_config
    from .errors import ConfigInvalid, DskgError

    os.makedirs(args.out, exist_ok=True)
    base = os.path.join(args.out, args.command.replace("-", "_"))
    report = {"command": args.command}
    code = 0
    try:
        doc = {}
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigInvalid(f"cannot read config: {exc}") from None
            if not isinstance(doc, dict):
                raise ConfigInvalid("config must be a JSON object")
        cfg = build_config(args.command, doc, args.seed)
        report["config"] = cfg.__dict__
        summary, header, rows = RUNNERS[args.command](cfg)
        report["result"] = summary
        report["status"] = "ok"
        if rows:
            write_csv(base + ".csv", header, rows)
        if args.command == "selftest" and not summary.get("passed", False):
            code = 3
            report["status"] = "failed"
    except DskgError as exc:
        code = exc.exit_code
        report.update(status="error", error=exc.name, message=str(exc))
    write_json(base + ".json", report)
    status = report["status"] if code == 0 else f"{report['status']} ({report.get('error', 'checks')})"
    print(f"dskg {args.command}: {status} -> {base}.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
