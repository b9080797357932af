"""Command-line front end: config ingestion, runs, sweeps, bound batteries.

Config files are flat ``section.key = value`` lines (events as four reals).
Summaries are JSON with a fixed field order and every float printed with 12
significant digits; sweeps emit CSV.  Exit statuses: 0 all checks satisfied,
1 a check failed, 2 usage or config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import netsim
from .adversary import (
    AliceStrategy,
    Directive,
    DriftModel,
    Labeling,
    StrategyKind,
    bob_early_guess_advantage,
    optimal_cheat_state,
    strategy_expectations,
    superposition_commit_state,
)
from .bounds import BoundReport, Variant
from .noise import NoiseParams
from .protocol import (
    Message,
    MessageKind,
    MessageRecord,
    ProtocolParams,
    Transcript,
    VerdictKind,
    iter_runs,
    rep_seed,
    transcript_lines,
)
from .quantum import parse_label
from .spacetime import (
    CommitmentGeometry,
    Event,
    VerifyPolicy,
    classify_commitment,
    earliest_verification_event,
)


class ConfigError(Exception):
    """Config file failed to parse or validate; message names line/key."""


def fmt(x: float) -> str:
    """Canonical 12-significant-digit rendering used in all emitted output."""
    return format(float(x), ".12g")


def json_text(obj) -> str:
    """Tiny ordered JSON emitter with canonical float formatting."""
    if isinstance(obj, dict):
        inner = ",".join(f'"{k}":{json_text(v)}' for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(json_text(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        return fmt(obj)
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(str(obj))


# -- config ---------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    """Flat key-value lines; '#' comments; raises ConfigError with line numbers."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _get(cfg: dict[str, str], key: str, default: str | None = None) -> str:
    if key in cfg:
        return cfg[key]
    if default is None:
        raise ConfigError(f"missing required key {key!r}")
    return default


def _parse_event(cfg: dict[str, str], key: str) -> Event:
    parts = _get(cfg, key).split()
    if len(parts) != 4:
        raise ConfigError(f"key {key!r}: an event needs four reals, got {len(parts)}")
    try:
        return Event(*(float(p) for p in parts))
    except ValueError as e:
        raise ConfigError(f"key {key!r}: {e}") from None


def _parse_float(cfg: dict[str, str], key: str, default: str) -> float:
    try:
        return float(_get(cfg, key, default))
    except ValueError:
        raise ConfigError(f"key {key!r}: not a real number") from None


def _parse_int(cfg: dict[str, str], key: str, default: str | None = None) -> int:
    try:
        return int(_get(cfg, key, default))
    except ValueError:
        raise ConfigError(f"key {key!r}: not an integer") from None


def _parse_enum(cfg, key, enum, default):
    raw = _get(cfg, key, default)
    try:
        return enum(raw)
    except ValueError:
        valid = ", ".join(m.value for m in enum)
        raise ConfigError(f"key {key!r}: {raw!r} not one of {valid}") from None


@dataclass
class RunConfig:
    params: ProtocolParams
    strategy: AliceStrategy
    noise: NoiseParams
    drift: DriftModel
    repetitions: int
    output_path: str
    write_transcripts: bool

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("key 'run.repetitions': must be >= 1")


def _parse_strategy(cfg: dict[str, str]) -> AliceStrategy:
    kind = _parse_enum(cfg, "strategy.kind", StrategyKind, "HONEST")
    claim = cfg.get("strategy.claim")
    claim_bit = int(claim) if claim is not None else None
    directive = _parse_enum(cfg, "strategy.directive", Directive, "UNVEIL")
    if kind is StrategyKind.HONEST:
        commit = _parse_int(cfg, "strategy.commit", "0")
        if commit not in (0, 1):
            raise ConfigError("key 'strategy.commit': must be 0 or 1")
        return AliceStrategy.honest(commit, claim_bit, directive)
    if kind is StrategyKind.SUPERPOSITION:
        try:
            alpha = complex(_get(cfg, "strategy.alpha"))
            beta = complex(_get(cfg, "strategy.beta"))
        except ValueError:
            raise ConfigError("key 'strategy.alpha/beta': not complex numbers") from None
        return AliceStrategy(StrategyKind.SUPERPOSITION, alpha=alpha, beta=beta,
                             claim=claim_bit, directive=directive)
    if kind is StrategyKind.OPTIMAL_CHEAT:
        return AliceStrategy(StrategyKind.OPTIMAL_CHEAT, claim=claim_bit,
                             directive=directive)
    raise ConfigError("key 'strategy.kind': CUSTOM strategies are API-only")


def load_config(cfg: dict[str, str], seed_override: int | None = None,
                reps_override: int | None = None,
                out_override: str | None = None) -> RunConfig:
    geometry = CommitmentGeometry(
        _parse_event(cfg, "geometry.P"),
        (_parse_event(cfg, "geometry.Q0"), _parse_event(cfg, "geometry.Q1")),
    )
    try:
        params = ProtocolParams(
            n=_parse_int(cfg, "protocol.N"),
            variant=_parse_enum(cfg, "protocol.variant", Variant, "ETBC"),
            epsilon=_parse_float(cfg, "protocol.epsilon", "0"),
            geometry=geometry,
            seed=seed_override if seed_override is not None
            else _parse_int(cfg, "run.seed", "0"),
            verify_policy=_parse_enum(cfg, "protocol.policy", VerifyPolicy, "AT_P"),
            claim_sender=_get(cfg, "protocol.claim_sender", "A_c"),
            send_claim=_get(cfg, "protocol.send_claim", "true").lower() == "true",
        )
        strategy = _parse_strategy(cfg)
        noise = NoiseParams(
            depolarizing_q=_parse_float(cfg, "noise.q", "0"),
            loss_l=_parse_float(cfg, "noise.l", "0"),
        )
        drift = DriftModel(
            rate=_parse_float(cfg, "drift.rate", "0"),
            labeling=_parse_enum(cfg, "drift.labeling", Labeling, "SEQUENTIAL"),
            swap_bit=int(cfg["drift.bit"]) if "drift.bit" in cfg else None,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return RunConfig(
        params=params,
        strategy=strategy,
        noise=noise,
        drift=drift,
        repetitions=reps_override if reps_override is not None
        else _parse_int(cfg, "run.repetitions", "1"),
        output_path=out_override or _get(cfg, "run.output", "out"),
        write_transcripts=_get(cfg, "run.transcripts", "true").lower() == "true",
    )


_SERIAL_ORDER = [
    "protocol.variant", "protocol.N", "protocol.epsilon", "protocol.policy",
    "protocol.claim_sender", "protocol.send_claim",
    "geometry.P", "geometry.Q0", "geometry.Q1",
    "strategy.kind", "strategy.commit", "strategy.claim", "strategy.alpha",
    "strategy.beta", "strategy.directive",
    "noise.q", "noise.l",
    "drift.rate", "drift.labeling", "drift.bit",
    "run.seed", "run.repetitions", "run.output", "run.transcripts",
]


def serialize_config(config: RunConfig) -> str:
    """Canonical rendering; parse(serialize(parse(c))) is a fixed point."""
    p, s, n, d = config.params, config.strategy, config.noise, config.drift
    vals: dict[str, str] = {
        "protocol.variant": p.variant.value,
        "protocol.N": str(p.n),
        "protocol.epsilon": fmt(p.epsilon),
        "protocol.policy": p.verify_policy.value,
        "protocol.claim_sender": p.claim_sender,
        "protocol.send_claim": "true" if p.send_claim else "false",
        "geometry.P": " ".join(fmt(c) for c in p.geometry.commit_point.coords()),
        "geometry.Q0": " ".join(fmt(c) for c in p.geometry.unveil_points[0].coords()),
        "geometry.Q1": " ".join(fmt(c) for c in p.geometry.unveil_points[1].coords()),
        "strategy.kind": s.kind.value,
        "strategy.directive": s.directive.value,
        "noise.q": fmt(n.depolarizing_q),
        "noise.l": fmt(n.loss_l),
        "drift.rate": fmt(d.rate),
        "drift.labeling": d.labeling.value,
        "run.seed": str(p.seed),
        "run.repetitions": str(config.repetitions),
        "run.output": config.output_path,
        "run.transcripts": "true" if config.write_transcripts else "false",
    }
    if s.commit is not None:
        vals["strategy.commit"] = str(s.commit)
    if s.claim is not None:
        vals["strategy.claim"] = str(s.claim)
    if s.alpha is not None:
        vals["strategy.alpha"] = str(s.alpha)
        vals["strategy.beta"] = str(s.beta)
    if d.swap_bit is not None:
        vals["drift.bit"] = str(d.swap_bit)
    return "".join(f"{k} = {vals[k]}\n" for k in _SERIAL_ORDER if k in vals)


# -- subcommands ------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (0.0, 1.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = phat + z * z / (2 * trials)
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return ((centre - half) / denom, (centre + half) / denom)


def cmd_run(config: RunConfig) -> int:
    out_dir = Path(config.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {"ACCEPT_0": 0, "ACCEPT_1": 0, "REJECT": 0, "NO_UNVEIL": 0}
    accepts_claim = 0
    lines: list[str] = []
    for rep, transcript in enumerate(
        iter_runs(config.params, config.strategy, config.noise, config.repetitions)
    ):
        v = transcript.verdict
        if v.kind is VerdictKind.ACCEPT:
            counts[f"ACCEPT_{v.bit}"] += 1
            accepts_claim += 1
        else:
            counts[v.kind.value] += 1
        if config.write_transcripts:
            lines.extend(transcript_lines(transcript, rep=rep))
    if config.write_transcripts:
        (out_dir / "transcripts.jsonl").write_text("\n".join(lines) + "\n")
    rate = accepts_claim / config.repetitions
    lo, hi = wilson_interval(accepts_claim, config.repetitions)
    summary = {
        "variant": config.params.variant.value,
        "N": config.params.n,
        "strategy": config.strategy.kind.value,
        "repetitions": config.repetitions,
        "base_seed": config.params.seed,
        "verdicts": counts,
        "accept_rate": rate,
        "accept_ci95_low": lo,
        "accept_ci95_high": hi,
    }
    text = json_text(summary)
    (out_dir / "summary.json").write_text(text + "\n")
    print(text)
    return 0


def build_bound_reports(spectral_ns: list[int], deltas: list[float],
                        tail_ns: list[int]) -> list[BoundReport]:
    """The full verification battery as BoundReport rows."""
    reports: list[BoundReport] = []
    for n in spectral_ns:
        for delta in deltas:
            if abs(delta * n - round(delta * n)) > 1e-9 or not 0 <= delta <= 0.5:
                continue
            norm = bounds_mod.threshold_product_norm(n, delta)
            bound = bounds_mod.qdelta_norm_bound(n, delta)
            cheat = bounds_mod.threshold_cheat_value(n, delta)
            reports.append(BoundReport(
                n, delta, Variant.ETBC, norm, bound, cheat,
                norm <= bound + bounds_mod.BOUND_ATOL,
            ))
        if n % 2 == 0:
            norm = bounds_mod.etrbc_admissible_norm_max(n)
            bound = 2.0 ** (-n / 6.0)
            reports.append(BoundReport(
                n, 0.0, Variant.ETRBC, norm, bound, 1.0 + norm,
                norm <= bound + bounds_mod.BOUND_ATOL,
            ))
    for n in tail_ns:
        tail = bounds_mod.subset_overlap_tail(n)
        bound = bounds_mod.etrbc_tail_bound(n)
        cheat = 1.0 + 2.0 ** (-n / 6.0 + 1) + 2.0 ** (-n / 3.0) + bound
        reports.append(BoundReport(
            n, 0.0, Variant.ETRBC, tail, bound, cheat,
            tail <= bound + bounds_mod.BOUND_ATOL,
        ))
    return reports


def cmd_bounds(spectral_ns: list[int], deltas: list[float],
               tail_ns: list[int], out_path: str | None) -> int:
    reports = build_bound_reports(spectral_ns, deltas, tail_ns)
    header = f"{'variant':8} {'N':>2} {'delta':>8} {'computed':>16} {'bound':>16} {'cheat':>16} ok"
    print(header)
    rows = []
    for r in reports:
        print(
            f"{r.variant.value:8} {r.n:>2} {fmt(r.delta):>8} "
            f"{fmt(r.computed_norm):>16} {fmt(r.closed_form_bound):>16} "
            f"{fmt(r.cheat_value):>16} {'yes' if r.satisfied else 'NO'}"
        )
        rows.append({
            "variant": r.variant.value, "N": r.n, "delta": r.delta,
            "computed_norm": r.computed_norm,
            "closed_form_bound": r.closed_form_bound,
            "cheat_value": r.cheat_value, "satisfied": r.satisfied,
        })
    if out_path:
        Path(out_path).write_text(json_text(rows) + "\n")
    return 0 if all(r.satisfied for r in reports) else 1


_SWEEP_KEYS = ("N", "epsilon", "q", "l", "rate", "alpha")


def _sweep_grid(cfg: dict[str, str]) -> list[dict[str, float]]:
    axes: dict[str, list[float]] = {}
    for key in _SWEEP_KEYS:
        raw = cfg.get(f"sweep.{key}")
        if raw is not None:
            try:
                axes[key] = [float(v) for v in raw.split()]
            except ValueError:
                raise ConfigError(f"key 'sweep.{key}': not a list of reals") from None
    if not axes:
        raise ConfigError("sweep needs at least one sweep.* axis")
    points = [{}]
    for key, values in axes.items():
        points = [dict(p, **{key: v}) for p in points for v in values]
    return points


def cmd_sweep(cfg: dict[str, str], config: RunConfig, out_path: str | None) -> int:
    """One CSV row per grid point: acceptance rates, advantages, bound margins."""
    points = _sweep_grid(cfg)
    base_seed = config.params.seed
    cols = list(_SWEEP_KEYS) + [
        "accept0_rate", "accept1_rate", "p0_exact", "p1_exact",
        "cheat_sum", "bound", "margin", "advantage",
    ]
    out_lines = [",".join(cols)]
    rows = []
    for idx, point in enumerate(points):
        n = int(point.get("N", config.params.n))
        eps = float(point.get("epsilon", config.params.epsilon))
        q = float(point.get("q", config.noise.depolarizing_q))
        l = float(point.get("l", config.noise.loss_l))
        rate = float(point.get("rate", config.drift.rate))
        strategy = config.strategy
        if "alpha" in point:
            a = complex(point["alpha"])
            b = complex(np.sqrt(max(0.0, 1.0 - abs(a) ** 2)))
            strategy = AliceStrategy(StrategyKind.SUPERPOSITION, alpha=a, beta=b)
        params = ProtocolParams(
            n=n, variant=config.params.variant, epsilon=eps,
            geometry=config.params.geometry,
            seed=rep_seed(base_seed, idx),
            verify_policy=config.params.verify_policy,
            claim_sender=config.params.claim_sender,
            send_claim=config.params.send_claim,
        )
        noise = NoiseParams(depolarizing_q=q, loss_l=l)
        drift = DriftModel(rate=rate, labeling=config.drift.labeling,
                           swap_bit=config.drift.swap_bit)
        acc = {0: 0, 1: 0}
        for claim in (0, 1):
            strat = _with_claim(strategy, claim)
            # separate stream per claim so the two estimates are uncorrelated
            base = rep_seed(params.seed, claim + 1)
            for t in iter_runs(params, strat, noise, config.repetitions, base):
                v = t.verdict
                if v.kind is VerdictKind.ACCEPT and v.bit == claim:
                    acc[claim] += 1
        p0_exact, p1_exact = _exact_probs(strategy, n)
        cheat = (p0_exact + p1_exact) if p0_exact is not None else None
        bound = bounds_mod.etbc_cheat_bound(n)
        margin = (bound - cheat) if cheat is not None else None
        advantage = bob_early_guess_advantage(n, drift)
        row = dict(point)
        values = [
            row.get("N", n), row.get("epsilon", eps), row.get("q", q),
            row.get("l", l), row.get("rate", rate), row.get("alpha", ""),
            acc[0] / config.repetitions, acc[1] / config.repetitions,
            p0_exact, p1_exact, cheat, bound, margin, advantage,
        ]
        out_lines.append(",".join("" if v == "" or v is None else fmt(float(v))
                                  for v in values))
        rows.append(values)
    text = "\n".join(out_lines) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        print(text, end="")
    return 0


def _with_claim(strategy: AliceStrategy, claim: int) -> AliceStrategy:
    return AliceStrategy(
        strategy.kind, commit=strategy.commit, alpha=strategy.alpha,
        beta=strategy.beta, custom_state=strategy.custom_state,
        claim=claim, directive=strategy.directive,
    )


def _exact_probs(strategy: AliceStrategy, n: int) -> tuple[float | None, float | None]:
    if strategy.kind is StrategyKind.OPTIMAL_CHEAT and n <= bounds_mod.SPECTRAL_N_MAX:
        return strategy_expectations(optimal_cheat_state(n), n)
    if strategy.kind is StrategyKind.SUPERPOSITION and 4 * n + 1 <= 14:
        state = superposition_commit_state(n, strategy.alpha, strategy.beta)
        return strategy_expectations(state, n)
    return None, None


def _parse_transcript_line(line: str):
    rec = json.loads(line)
    kind = rec["kind"]
    if kind == "VERDICT":
        return None
    if kind == "BELL_MEASUREMENT":
        class _M:  # minimal measurement view for the auditor
            pass

        m = _M()
        m.kind = "BELL_MEASUREMENT"
        m.agent = rec["agent"]
        m.pair = tuple(parse_label(t) for t in rec["pair"].split("|"))
        return m
    payload: tuple | int | str
    if kind == "QUBIT_TRANSFER":
        payload = tuple(parse_label(t) for t in rec["payload"].split(","))
    elif kind == "CLASSICAL_BIT":
        payload = int(rec["payload"])
    else:
        payload = rec["payload"]
    msg = Message(
        MessageKind(kind), payload, rec["sender"], rec["receiver"],
        Event(*rec["send"]), Event(*rec["recv"]),
    )
    return MessageRecord(rec["i"], rec["time"], kind, msg)


def cmd_audit(path: str) -> int:
    """Re-validate a transcript file's causality and custody chains."""
    text = Path(path).read_text()
    by_rep: dict[int | None, Transcript] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = _parse_transcript_line(line)
            rep = json.loads(line).get("rep")
        except (KeyError, ValueError, json.JSONDecodeError) as e:
            raise ConfigError(f"line {lineno}: malformed transcript record: {e}")
        if rec is not None:
            by_rep.setdefault(rep, Transcript()).records.append(rec)
    violations: list[str] = []
    for rep, transcript in by_rep.items():
        for v in netsim.audit(transcript):
            violations.append(f"rep {rep}: {v}" if rep is not None else v)
    if violations:
        for v in violations:
            print(v)
        return 1
    print(f"OK: {sum(len(t.records) for t in by_rep.values())} records audited")
    return 0


def cmd_geometry(cfg: dict[str, str]) -> int:
    p = _parse_event(cfg, "geometry.P")
    qs = [_parse_event(cfg, "geometry.Q0"), _parse_event(cfg, "geometry.Q1")]
    cls = classify_commitment(p, qs)
    print(cls.value)
    for bit in (0, 1):
        if cls.value == "INVALID":
            break
        geom = CommitmentGeometry(p, tuple(qs))
        for policy in VerifyPolicy:
            ev = earliest_verification_event(geom, bit, qs[bit].t, policy)
            print(f"earliest bit={bit} {policy.value}: "
                  + " ".join(fmt(c) for c in ev.coords()))
    return 0


# -- entry point --------------------------------------------------------------


def _read_config(path: str) -> dict[str, str]:
    try:
        return parse_config(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="relbc",
        description="simulate entanglement-transfer bit commitment and verify its bounds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute seeded protocol repetitions")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--reps", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_bounds = sub.add_parser("bounds", help="verify every security bound")
    p_bounds.add_argument("--n", type=int, nargs="+", default=[1, 2, 3, 4])
    p_bounds.add_argument("--delta", type=float, nargs="+", default=[0.0])
    p_bounds.add_argument("--tail-n", type=int, nargs="+", default=[6, 8, 10, 12])
    p_bounds.add_argument("--out", default=None)

    p_sweep = sub.add_parser("sweep", help="grid sweep to CSV")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--reps", type=int, default=None)
    p_sweep.add_argument("--out", default=None)

    p_audit = sub.add_parser("audit", help="re-validate a transcript file")
    p_audit.add_argument("--transcript", required=True)

    p_geom = sub.add_parser("geometry", help="classify a configured geometry")
    p_geom.add_argument("--config", required=True)

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0,) else 0

    try:
        if args.command == "run":
            cfg = _read_config(args.config)
            config = load_config(cfg, args.seed, args.reps, args.out)
            return cmd_run(config)
        if args.command == "bounds":
            for n in args.n:
                if n > bounds_mod.SPECTRAL_N_MAX:
                    raise ConfigError(
                        f"spectral rows support N <= {bounds_mod.SPECTRAL_N_MAX}"
                    )
            return cmd_bounds(args.n, args.delta, args.tail_n, args.out)
        if args.command == "sweep":
            cfg = _read_config(args.config)
            config = load_config(cfg, args.seed, args.reps, args.out)
            return cmd_sweep(cfg, config, args.out)
        if args.command == "audit":
            return cmd_audit(args.transcript)
        if args.command == "geometry":
            return cmd_geometry(_read_config(args.config))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
