"""Command-line entry point: ``chebkex <group> <command> [options]``.

Exit codes: 0 ok, 2 configuration, 3 protocol, 4 precision, 5 I/O.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import math
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from . import analysis, attack, wire
from .chebyshev import t_analytic
from .errors import DegenerateValueError, ParameterError, ParseError, PrecisionError, ProtocolError, TransportError
from .protocol import KeyMaterial, SessionConfig, pick_public_x
from .realfield import PrecisionCtx
from .rng import HashDrbg, SystemRng
from .strategy import (
    SecretConfig,
    Suite,
    combination_count,
    draw_secret,
    evaluate_secret,
    exponent_of,
    shipped_suites,
)

EXIT_OK, EXIT_CONFIG, EXIT_PROTOCOL, EXIT_PRECISION, EXIT_IO = 0, 2, 3, 4, 5
SUITE_DIR_ENV = "QRKE_SUITE_DIR"

log = logging.getLogger("chebkex")


class ConfigError(Exception):
    pass


# --- configuration ------------------------------------------------------------------


def _rng(args):
    if args.seed is not None:
        if not args.insecure_testing:
            raise ConfigError("--seed requires --insecure-testing")
        log.warning("using a deterministic seed: output is NOT secure")
        return HashDrbg(args.seed)
    return SystemRng()


def resolve_suite(spec: str, security_bits: int = 128, digits: int | None = None) -> tuple[Suite, SecretConfig]:
    """A shipped name, a name found in $QRKE_SUITE_DIR, or an inline descriptor."""
    floor = None
    if spec.startswith("SUITE "):
        suite = Suite.from_descriptor(spec)
    else:
        builtin = shipped_suites(security_bits)
        if spec in builtin:
            suite, cfg = builtin[spec]
            floor = cfg.floor
        else:
            suite_dir = os.environ.get(SUITE_DIR_ENV)
            path = Path(suite_dir, f"{spec}.suite") if suite_dir else None
            if path is None or not path.is_file():
                raise ConfigError(f"unknown suite {spec!r}")
            suite = Suite.from_descriptor(path.read_text().strip(), name=spec)
    if digits:
        suite = suite.with_digits(digits)
    if floor is None:
        floor = min(10**39, max(2, suite.function_set.max_exponent))
    return suite, SecretConfig(floor=floor)


def _session_config(args) -> SessionConfig:
    suite, secret = resolve_suite(args.suite, args.security, args.digits)
    return SessionConfig(suite, secret, max_resumes=args.max_resumes, allow_undersized=args.allow_undersized)


def _endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError(f"endpoint must look like host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


@contextmanager
def _output(path: str | None):
    if not path or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _report_key(key: KeyMaterial, args, provisional: bool = False):
    tail = " (provisional until the initiator confirms)" if provisional else ""
    print(f"fingerprint {key.fingerprint}{tail}")
    if getattr(args, "emit_key", None):
        wire.write_private(Path(args.emit_key), key.key.hex().encode() + b"\n")


# --- suite ------------------------------------------------------------------------------


def cmd_suite_list(args):
    for name, (suite, _) in shipped_suites(args.security).items():
        print(f"{name:8} {suite.descriptor()}")
    suite_dir = os.environ.get(SUITE_DIR_ENV)
    if suite_dir and Path(suite_dir).is_dir():
        for path in sorted(Path(suite_dir).glob("*.suite")):
            print(f"{path.stem:8} {path.read_text().strip()}")


def cmd_suite_show(args):
    suite, _ = resolve_suite(args.name, args.security, args.digits)
    fs = suite.function_set
    print(suite.descriptor())
    print(f"suite_id {suite.suite_id}")
    print(f"required_digits {suite.required_digits}")
    print(f"log10_d_max {math.log10(fs.d_max):.2f}")
    print(f"combinations 2^{math.log2(combination_count(fs)):.2f}")


# --- kex --------------------------------------------------------------------------------


def cmd_kex_serve(args):
    cfg = _session_config(args)
    host, port = _endpoint(args.listen)
    if args.once:
        key = wire.run_responder(host, port, cfg, _rng(args), timeout=args.timeout)
        _report_key(key, args)
        return
    rng = _rng(args)
    counter = itertools.count()
    factory = (lambda: rng.fork(f"conn-{next(counter)}")) if isinstance(rng, HashDrbg) else (lambda: None)

    def on_result(key, error):
        if key is not None:
            print(f"fingerprint {key.fingerprint}", flush=True)
        else:
            print(f"session failed: {error}", file=sys.stderr, flush=True)

    with wire.ResponderServer((host, port), cfg, factory, on_result, args.timeout) as server:
        print(f"listening on {server.server_address[0]}:{server.server_address[1]}", flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass


def cmd_kex_connect(args):
    cfg = _session_config(args)
    host, port = _endpoint(args.endpoint)
    key = wire.run_initiator(host, port, cfg, _rng(args), timeout=args.timeout)
    _report_key(key, args)


def cmd_offline_offer(args):
    cfg = _session_config(args)
    wire.offline_offer(cfg, Path(args.out), Path(args.state), _rng(args))
    print(f"offer written to {args.out}")


def cmd_offline_respond(args):
    cfg = _session_config(args)
    key = wire.offline_respond(cfg, Path(args.inp), Path(args.out), _rng(args))
    _report_key(key, args, provisional=True)


def cmd_offline_finalize(args):
    cfg = _session_config(args)
    out = Path(args.out) if args.out else None
    result = wire.offline_finalize(cfg, Path(args.inp), Path(args.state), out, _rng(args))
    if isinstance(result, KeyMaterial):
        _report_key(result, args)
    else:
        print(f"mismatch, resume written to {args.out or '(nowhere)'}: {result.diagnostic}")


# --- attack --------------------------------------------------------------------------------


def _plant(suite: Suite, secret: SecretConfig, rng):
    ctx = suite.ctx
    for _ in range(100):
        x = pick_public_x(ctx, rng)
        sel = draw_secret(suite.function_set, secret, rng)
        try:
            return x, sel, evaluate_secret(sel, x, ctx)
        except DegenerateValueError:
            continue
    raise ParameterError("could not plant a non-degenerate instance")


def cmd_attack_sieve(args):
    rng = _rng(args)
    rows = []
    summary = []
    for trial in range(args.trials):
        if args.toy_exponent:
            ctx = PrecisionCtx(args.toy_digits)
            x = pick_public_x(ctx, rng)
            n = args.toy_exponent
            y = t_analytic(n, x, ctx)
            bound = n
        else:
            suite, secret = resolve_suite(args.suite, args.security, args.digits)
            ctx = suite.ctx
            x, sel, y = _plant(suite, secret, rng)
            n = exponent_of(sel)
            bound = suite.function_set.d_max
        _, e = attack.sieve_params(y, x, ctx)
        width = args.search_width or attack.default_search_width(bound, e)
        digits = args.modulus_digits or [len(str(attack.default_modulus(bound))) - 1]
        for md in digits:
            result = attack.run_sieve_attack(x, y, ctx, 10**md, width, args.max_classes)
            rows += result.rows
            hit = n in result.verified
            summary.append(hit)
            log.info("trial %d M=10^%d: %d candidates, planted secret %s", trial, md, result.work,
                     "recovered" if hit else "not recovered")
    with _output(args.out) as fh:
        attack.write_attack_csv(fh, rows)
    print(f"recovered {sum(summary)}/{len(summary)}", file=sys.stderr)


def cmd_attack_brute(args):
    rng = _rng(args)
    suite, secret = resolve_suite(args.suite, args.security, args.digits)
    x, sel, y = _plant(suite, secret, rng)
    result = attack.brute_force_combinations(suite.function_set, x, y, suite.ctx)
    with _output(args.out) as fh:
        attack.write_attack_csv(fh, result.rows)
    found = exponent_of(sel) in result.verified
    print(f"planted secret {'recovered' if found else 'NOT recovered'} after {result.work} evaluations",
          file=sys.stderr)
    if not found:
        return EXIT_PROTOCOL


DIVERGENCE_COLUMNS = ("r", "s", "degree", "low_agreement", "first_disagreeing_digit", "sign_match",
                      "recurrence_agreement", "high_agreement")


def cmd_attack_double_demo(args):
    import csv

    rng = _rng(args)
    pairs = []
    if args.pair:
        for text in args.pair:
            r, _, s = text.partition(",")
            pairs.append((int(r), int(s)))
    else:
        for _ in range(args.trials):
            pairs.append((2 + rng.randbelow(999), 2 + rng.randbelow(999)))
    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIVERGENCE_COLUMNS)
        for r, s in pairs:
            x = pick_public_x(PrecisionCtx(16), rng)
            rep = attack.double_precision_divergence(r, s, x)
            writer.writerow((r, s, rep.degree, rep.low_agreement, rep.first_disagreeing_digit or "",
                             int(rep.sign_match), rep.recurrence_agreement, rep.high_agreement))


# --- analyze ------------------------------------------------------------------------------


def cmd_analyze_digits(args):
    cfg = _session_config(args)
    values = analysis.collect_shared_secrets(cfg, args.samples, _rng(args))
    sample = analysis.DigitSample.from_values(values, args.positions)
    with _output(args.out) as fh:
        analysis.write_digit_csv(fh, analysis.digit_uniformity(sample))


def cmd_analyze_magnitude(args):
    suite, _ = resolve_suite(args.suite, args.security)
    mag = analysis.magnitude_report(suite.function_set, args.trials, _rng(args), args.bin_width)
    with _output(args.out) as fh:
        analysis.write_magnitude_csv(fh, mag)
    print(f"mean {mag.mean:.3f} expected {mag.expected_mean:.3f}", file=sys.stderr)


def cmd_analyze_scaling(args):
    suites = [resolve_suite(name, args.security)[0] for name in args.suite]
    result = analysis.measure_scaling(suites, args.grid, args.repetitions)
    with _output(args.out) as fh:
        analysis.write_scaling_csv(fh, result)
    for name, a in result.fits.items():
        print(f"{name} a={a:.3f}", file=sys.stderr)


def cmd_analyze_cost(args):
    import csv

    with _output(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("suite", "digits", "a", "storage_units", "time_units"))
        for name in args.suite:
            suite, _ = resolve_suite(name, args.security, args.digits)
            est = analysis.estimate_cost(suite.function_set, suite.digits, args.a)
            writer.writerow((name, suite.digits, args.a, est.storage_units, f"{est.time_units:.6g}"))


# --- parser ---------------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p, *, suite_default="4-2", digits=True):
    p.add_argument("--suite", default=suite_default, help="shipped suite name, $QRKE_SUITE_DIR name or inline descriptor")
    p.add_argument("--security", type=int, choices=(128, 256), default=128, help="security level in bits")
    if digits:
        p.add_argument("--digits", type=int, help="override the suite precision")
    p.add_argument("--seed", help="deterministic RNG seed (requires --insecure-testing)")
    p.add_argument("--insecure-testing", action="store_true", help="allow --seed")


def _kex_common(p):
    _common(p)
    p.add_argument("--max-resumes", type=int, default=3, help="resume attempts after a mismatch")
    p.add_argument("--allow-undersized", action="store_true", help="permit digits below the required precision")
    p.add_argument("--emit-key", metavar="FILE", help="write the raw key (hex) to FILE, mode 0600")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chebkex", description="Chebyshev-polynomial key exchange toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    groups = parser.add_subparsers(dest="group", required=True, metavar="{suite,kex,attack,analyze}")

    suite = groups.add_parser("suite", help="inspect parameter suites").add_subparsers(dest="cmd", required=True)
    p = suite.add_parser("list", help="list suite descriptors")
    p.add_argument("--security", type=int, choices=(128, 256), default=128, help="security level in bits")
    p.set_defaults(func=cmd_suite_list)
    p = suite.add_parser("show", help="show one suite and its required precision")
    p.add_argument("name", help="suite name or inline descriptor")
    p.add_argument("--security", type=int, choices=(128, 256), default=128, help="security level in bits")
    p.add_argument("--digits", type=int, help="override the suite precision")
    p.set_defaults(func=cmd_suite_show)

    kex = groups.add_parser("kex", help="run a handshake").add_subparsers(dest="cmd", required=True)
    p = kex.add_parser("serve", help="responder over TCP")
    _kex_common(p)
    p.add_argument("--listen", default="127.0.0.1:7421", help="host:port to bind")
    p.add_argument("--once", action="store_true", help="exit after one handshake")
    p.add_argument("--timeout", type=float, default=wire.DEFAULT_TIMEOUT, help="seconds per message")
    p.set_defaults(func=cmd_kex_serve)
    p = kex.add_parser("connect", help="initiator over TCP")
    _kex_common(p)
    p.add_argument("endpoint", help="host:port of the responder")
    p.add_argument("--timeout", type=float, default=wire.DEFAULT_TIMEOUT, help="seconds per message")
    p.set_defaults(func=cmd_kex_connect)
    offline = kex.add_parser("offline", help="file-based handshake").add_subparsers(dest="step", required=True)
    p = offline.add_parser("offer", help="initiator: write an OFFER")
    _kex_common(p)
    p.add_argument("--out", required=True, help="OFFER envelope file")
    p.add_argument("--state", required=True, help="private initiator state file (mode 0600)")
    p.set_defaults(func=cmd_offline_offer)
    p = offline.add_parser("respond", help="responder: answer an OFFER")
    _kex_common(p)
    p.add_argument("--in", dest="inp", required=True, help="OFFER or RESUME envelope file")
    p.add_argument("--out", required=True, help="RESPOND envelope file")
    p.set_defaults(func=cmd_offline_respond)
    p = offline.add_parser("finalize", help="initiator: check a RESPOND")
    _kex_common(p)
    p.add_argument("--in", dest="inp", required=True, help="RESPOND envelope file")
    p.add_argument("--state", required=True, help="initiator state file from the offer step")
    p.add_argument("--out", help="CONFIRM or RESUME envelope file")
    p.set_defaults(func=cmd_offline_finalize)

    atk = groups.add_parser("attack", help="cryptanalysis experiments").add_subparsers(dest="cmd", required=True)
    p = atk.add_parser("sieve", help="diophantine sieve against planted secrets")
    _common(p, suite_default="64-4")
    p.add_argument("--trials", type=int, default=1, help="planted instances")
    p.add_argument("--modulus-digits", type=_int_list, help="comma-separated log10(M) values")
    p.add_argument("--search-width", type=int, help="residual enumeration half-width")
    p.add_argument("--max-classes", type=int, default=4, help="solutions taken per congruence")
    p.add_argument("--toy-exponent", type=int, help="plant this exponent instead of a suite draw")
    p.add_argument("--toy-digits", type=int, default=30, help="precision for --toy-exponent")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_attack_sieve)
    p = atk.add_parser("brute", help="enumerate all combinations against a planted secret")
    _common(p)
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_attack_brute)
    p = atk.add_parser("double-demo", help="composition order at 16 vs 200 digits")
    _common(p)
    p.add_argument("--pair", action="append", help="r,s pair (repeatable); default random pairs")
    p.add_argument("--trials", type=int, default=20, help="random pairs when --pair is absent")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_attack_double_demo)

    ana = groups.add_parser("analyze", help="statistics and cost studies").add_subparsers(dest="cmd", required=True)
    p = ana.add_parser("digits", help="chi-square digit uniformity of shared secrets")
    _kex_common(p)
    p.add_argument("--samples", type=int, default=1000, help="number of handshakes")
    p.add_argument("--positions", type=int, default=40, help="leading digit positions to test")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_analyze_digits)
    p = ana.add_parser("magnitude", help="histogram of log10 secret exponents")
    _common(p, suite_default="64-4", digits=False)
    p.add_argument("--trials", type=int, default=10_000, help="draws")
    p.add_argument("--bin-width", type=float, help="histogram bin width in log10 units")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_analyze_magnitude)
    p = ana.add_parser("scaling", help="evaluation time against precision")
    p.add_argument("--suite", action="append", default=None, help="suite to time (repeatable)")
    p.add_argument("--security", type=int, choices=(128, 256), default=128, help="security level in bits")
    p.add_argument("--grid", type=_int_list, default=[1000, 2000, 4000, 8000], help="comma-separated digit counts")
    p.add_argument("--repetitions", type=int, default=3, help="timings per grid point")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_analyze_scaling)
    p = ana.add_parser("cost", help="storage/time cost estimates")
    p.add_argument("--suite", action="append", default=None, help="suite to estimate (repeatable)")
    p.add_argument("--security", type=int, choices=(128, 256), default=128, help="security level in bits")
    p.add_argument("--digits", type=int, help="override the suite precision")
    p.add_argument("-a", type=float, default=2.0, help="multiplication exponent in (1.4, 2]")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_analyze_cost)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "suite", "") is None:
        args.suite = ["4-2"] if args.func is cmd_analyze_scaling else ["64-4", "128-2"]
    try:
        return args.func(args) or EXIT_OK
    except (ConfigError, ParameterError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PrecisionError as exc:
        print(f"precision error: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except ProtocolError as exc:
        detail = f" [{exc.code}]"
        diag = getattr(exc, "diagnostic", None)
        print(f"protocol error{detail}: {exc}" + (f"; {diag}" if diag else ""), file=sys.stderr)
        return EXIT_PROTOCOL
    except (TransportError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
