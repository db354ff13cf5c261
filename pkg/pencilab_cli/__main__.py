#!/usr/bin/env python3
"""
Batch front-end for pencilab: run scenario files, export plot data, validate.

Configuration is accepted via the following environment variables:

    PENCILAB_LOG_LEVEL - log level name (default="INFO")
    PENCILAB_FD_STEP - finite-difference step (default=1e-4)
    PENCILAB_THREADS - worker threads for grid sweeps (default=1)
    PENCILAB_REAL_MODE - "on" to reject non-positive square-root radicands
    PENCILAB_COND_LIMIT - condition limit for the Nystrom solve (default=1e12)

Exit codes: 0 pass, 1 residual failure, 2 input error, 3 numerical error.
"""
import argparse
import configparser
import enum
import functools
import io
import json
import logging
import os
import sys
import typing

from pencilab import __version__
from pencilab.errors import InputError, PencilabError
from pencilab.runner import (
    EXPORT_KINDS,
    RunReport,
    export_plot_data,
    load_report,
    run as run_scenario,
    write_report,
)
from pencilab.scenario import load

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def config_logging(level: int = logging.INFO, stream: typing.TextIO = sys.stderr) -> None:
    logging.basicConfig(
        stream=stream,
        style="{",
        format="# {name}:{levelname}:{asctime}:: {message}",
        datefmt="%Y-%m-%dT%H%M%S",
        level=level,
    )


def log_level() -> int:
    return getattr(
        logging,
        os.environ.get("PENCILAB_LOG_LEVEL", "INFO").strip().upper(),
    )


log = logging.getLogger("pencilab")


def _command(
    method: typing.Callable[["Lab", argparse.Namespace], int]
) -> typing.Callable[["Lab", argparse.Namespace], int]:
    @functools.wraps(method)
    def wrapper(self: "Lab", known_args: argparse.Namespace) -> int:
        msg = f"command {method.__name__!r} failed"
        try:
            return method(self, known_args)
        except PencilabError as exc:
            if log.isEnabledFor(logging.DEBUG):
                log.exception(msg)
            else:
                log.error(f"{msg} err={exc}")
            return EXIT_INPUT if isinstance(exc, InputError) else EXIT_NUMERICAL
        except OSError as exc:
            log.error(f"{msg} err={exc!r}")
            return EXIT_INPUT

    return wrapper


class _DataFormats(enum.Enum):
    INI = "ini"
    JSON = "json"


class Lab:
    def __init__(self) -> None:
        self.data_format = _DataFormats.INI

    @_command
    def run(self, known_args: argparse.Namespace) -> int:
        scenario = load(known_args.scenario)
        log.debug(f"loaded scenario path={known_args.scenario!r} name={scenario.name!r}")
        report = run_scenario(
            scenario,
            tolerance=known_args.tolerance,
            threads=known_args.threads,
            seed=known_args.seed,
            timings=known_args.timings,
        )
        directory = known_args.out if known_args.out is not None else scenario.output.directory
        path = write_report(report, directory, scenario.output.report)
        print(self._format_summary(report, path), end="")
        return EXIT_PASS if report.passed else EXIT_FAIL

    @_command
    def export(self, known_args: argparse.Namespace) -> int:
        report = load_report(known_args.report)
        path = export_plot_data(report, known_args.what, known_args.out)
        print(self._format_export(known_args.what, path), end="")
        return EXIT_PASS

    @_command
    def validate(self, known_args: argparse.Namespace) -> int:
        scenario = load(known_args.scenario)
        log.info(f"scenario is valid path={known_args.scenario!r}")
        print(self._format_validation(known_args.scenario, scenario.kind.value), end="")
        return EXIT_PASS

    def _format_summary(self, report: RunReport, path: str) -> str:
        summary: typing.Dict[str, typing.Dict[str, typing.Any]] = {
            "report": {
                "path": path,
                "verdict": report.verdict,
                "pencil": report.pencil,
                "seed": report.seed,
            }
        }
        for name, section in report.sections.items():
            summary[name] = {
                "passed": section.passed,
                "max_norm": f"{section.max_norm:.3e}",
                "failures": ", ".join(section.failures()),
            }
        return getattr(self, f"_format_{self.data_format.value}")(summary)

    def _format_export(self, what: str, path: str) -> str:
        return getattr(self, f"_format_{self.data_format.value}")(
            {"export": {"what": what, "path": path}}
        )

    def _format_validation(self, path: str, kind: str) -> str:
        return getattr(self, f"_format_{self.data_format.value}")(
            {"scenario": {"path": path, "source": kind, "valid": True}}
        )

    def _format_ini(self, sections: typing.Mapping[str, typing.Mapping[str, typing.Any]]) -> str:
        ini = configparser.ConfigParser(interpolation=None)
        for name, values in sections.items():
            ini.add_section(name)
            for key, value in values.items():
                ini.set(name, str(key), str(value))
        buf = io.StringIO()
        ini.write(buf)
        buf.seek(0)
        return buf.read()

    def _format_json(self, sections: typing.Mapping[str, typing.Mapping[str, typing.Any]]) -> str:
        return json.dumps(sections, indent=2) + "\n"


def main(sysargs: typing.List[str] = sys.argv[:]) -> int:
    lab = Lab()
    parser = argparse.ArgumentParser(
        prog="pencilab",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--version", action="store_true", help="print the version and exit"
    )
    parser.add_argument(
        "-j",
        "--output-json",
        action="store_true",
        default=False,
        help="format all output as json",
    )
    parser.add_argument(
        "-D",
        "--debug",
        action="store_true",
        default=log_level() == logging.DEBUG,
        help="enable debug logging",
    )
    subparsers = parser.add_subparsers(title="commands")

    parser_run = subparsers.add_parser("run", help="run a scenario and write its report")
    parser_run.add_argument("scenario", help="scenario JSON file")
    parser_run.add_argument("-o", "--out", default=None, help="report directory")
    parser_run.add_argument(
        "-t", "--tolerance", type=float, default=None, help="override every tolerance"
    )
    parser_run.add_argument(
        "-k", "--threads", type=int, default=None, help="worker threads for grid sweeps"
    )
    parser_run.add_argument("-s", "--seed", type=int, default=None, help="override the seed")
    parser_run.add_argument(
        "--timings",
        action="store_true",
        help="record per-section wall times in the report",
    )
    parser_run.set_defaults(func=lab.run)

    parser_export = subparsers.add_parser("export", help="export plot data from a report")
    parser_export.add_argument("report", help="report JSON file")
    parser_export.add_argument("-w", "--what", choices=EXPORT_KINDS, required=True)
    parser_export.add_argument("-o", "--out", required=True, help="CSV file to write")
    parser_export.set_defaults(func=lab.export)

    parser_validate = subparsers.add_parser("validate", help="validate a scenario file")
    parser_validate.add_argument("scenario", help="scenario JSON file")
    parser_validate.set_defaults(func=lab.validate)

    known_args = parser.parse_args(sysargs[1:])
    config_logging(level=logging.DEBUG if known_args.debug else logging.INFO)
    if known_args.debug:
        log.setLevel(logging.DEBUG)
    if known_args.version:
        print(f"pencilab {__version__}")
        return EXIT_PASS
    if known_args.output_json:
        lab.data_format = _DataFormats.JSON
    if not hasattr(known_args, "func"):
        log.debug(f"no subcommand func defined in namespace={known_args!r}")
        parser.print_help()
        return EXIT_INPUT
    return typing.cast(int, known_args.func(known_args))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
