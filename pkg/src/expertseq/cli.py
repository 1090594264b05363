"""Command-line surface: evaluate, posterior, map and bounds subcommands.

File formats (UTF-8, newline-delimited):
  data file    one outcome symbol per line, symbols drawn from --alphabet
  advice file  header row of expert names, then one row per step;
               in full mode each row holds k * |alphabet| probabilities
               (expert-major, alphabet order), in realized mode k
               probabilities assigned to the realized outcome

Exit codes: 0 success, 2 input error, 3 zero-marginal abort,
4 unsupported combination. Output floats carry 12 significant digits so
identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import models
from .experts import (Alphabet, AdviceExpert, ConstantExpert, ForecastingSystem,
                      KTEstimator, LaplaceEstimator, MarkovExpert, uniform_expert)
from .forward import ForwardPass, ZeroMarginalError, posterior_experts
from .logprob import to_bits
from .approx import trimming_hook
from .switch_map import switch_map
from . import bounds as bnd


class InputError(Exception):
    pass


class UnsupportedError(Exception):
    pass


def _fmt(x: float) -> str:
    return "%.12g" % x


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as e:
        raise InputError(f"bad {what}: {e}") from None


def _parse_pi_t(spec: str) -> models.SwitchTimeLaw:
    if spec == "inv-poly":
        return models.inv_poly()
    if spec == "elias":
        return models.elias_delta()
    if spec.startswith("geometric:"):
        return models.geometric(float(spec.split(":", 1)[1]))
    if spec.startswith("uniform:"):
        ab = _parse_floats(spec.split(":", 1)[1], "--pi-t uniform bounds")
        if len(ab) != 2:
            raise InputError("--pi-t uniform needs two bounds a,b")
        return models.uniform_span(int(ab[0]), int(ab[1]))
    raise InputError(f"unknown --pi-t spec {spec!r}")


def _parse_builtin(spec: str, alphabet_size: int) -> tuple[list[ForecastingSystem], list[str]]:
    experts: list[ForecastingSystem] = []
    names: list[str] = []
    for i, part in enumerate(spec.split(";")):
        part = part.strip()
        if part == "kt":
            experts.append(KTEstimator(alphabet_size))
            names.append(f"kt{i}")
        elif part == "laplace":
            experts.append(LaplaceEstimator(alphabet_size))
            names.append(f"laplace{i}")
        elif part.startswith("const:"):
            probs = _parse_floats(part.split(":", 1)[1], "constant expert")
            if len(probs) != alphabet_size:
                raise InputError(f"constant expert {i} needs {alphabet_size} probabilities")
            experts.append(ConstantExpert(probs))
            names.append(f"const{i}")
        elif part.startswith("markov:"):
            groups = part.split(":", 1)[1].split("|")
            if len(groups) != alphabet_size + 1:
                raise InputError(f"markov expert {i} needs an initial row plus {alphabet_size} transition rows")
            rows = [_parse_floats(g, "markov expert") for g in groups]
            experts.append(MarkovExpert(rows[0], rows[1:]))
            names.append(f"markov{i}")
        else:
            raise InputError(f"unknown builtin expert {part!r}")
    return experts, names


def _read_data(path: str, alphabet: Alphabet) -> list[int]:
    data = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                tok = line.strip()
                if not tok:
                    continue
                try:
                    data.append(alphabet.index(tok))
                except ValueError:
                    raise InputError(f"{path}:{lineno}: symbol {tok!r} not in alphabet")
    except OSError as e:
        raise InputError(f"cannot read data file: {e}") from None
    return data


def _read_advice(path: str, alphabet_size: int, mode: str, n_steps: int):
    """Returns (names, experts or None, logpred matrix or None)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as e:
        raise InputError(f"cannot read advice file: {e}") from None
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise InputError(f"{path}: empty advice file")
    names = [tok.strip() for tok in rows[0][1].split(",")]
    k = len(names)
    body = rows[1:]
    if len(body) != n_steps:
        raise InputError(
            f"{path}: advice has {len(body)} data rows but the data file has {n_steps} symbols "
            f"(first mismatching row {body[n_steps][0] if len(body) > n_steps else 'missing'})")
    want = k * alphabet_size if mode == "full" else k
    table = np.empty((len(body), want))
    for r, (lineno, ln) in enumerate(body):
        vals = _parse_floats(ln, f"advice row {lineno}")
        if len(vals) != want:
            raise InputError(f"{path}:{lineno}: expected {want} values, got {len(vals)}")
        table[r] = vals
    if mode == "full":
        experts = []
        for j in range(k):
            block = table[:, j * alphabet_size:(j + 1) * alphabet_size]
            try:
                experts.append(AdviceExpert(block))
            except ValueError as e:
                raise InputError(f"{path}: expert {names[j]!r}: {e}") from None
        return names, experts, None
    if np.any(table < 0) or np.any(table > 1):
        raise InputError(f"{path}: realized probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        return names, None, np.log(table)


def _weights(arg: str | None, k: int) -> list[float]:
    if arg is None:
        return [1.0 / k] * k
    w = _parse_floats(arg, "--weights")
    if len(w) != k:
        raise InputError(f"--weights needs {k} entries")
    return w


def _build_model(args, k: int, alphabet_size: int):
    """Returns (model, safe_expert_appended: bool). k counts the supplied experts."""
    name = args.model
    w = _weights(args.weights, k)
    if name == "bayes":
        return models.bayes(w), False
    if name == "fixed-elementwise":
        return models.fixed_elementwise(w), False
    if name == "universal-elementwise":
        return models.universal_elementwise(k), False
    if name == "fixed-share":
        if args.alpha is None:
            raise InputError("--model fixed-share requires --alpha")
        return models.fixed_share(w, args.alpha), False
    if name == "universal-share":
        return models.universal_share(w), False
    if name == "overconfident":
        if args.alpha is None:
            raise InputError("--model overconfident requires --alpha")
        return models.overconfident(w, args.alpha), True
    if name == "switch":
        cfg = models.SwitchConfig(args.theta, _parse_pi_t(args.pi_t), tuple(w))
        return models.switch(cfg, k), False
    if name == "run-length":
        return models.run_length(_parse_pi_t(args.pi_t), w), False
    raise InputError(f"unknown model {name!r}")


def _load_inputs(args):
    alphabet = Alphabet.of(tok.strip() for tok in args.alphabet.split(","))
    data = _read_data(args.data, alphabet)
    spec = args.experts
    if spec.startswith("builtin:"):
        experts, names = _parse_builtin(spec.split(":", 1)[1], len(alphabet))
        matrix = None
    elif spec.startswith("file:"):
        names, experts, matrix = _read_advice(spec.split(":", 1)[1], len(alphabet),
                                              args.advice_mode, len(data))
    else:
        raise InputError("--experts must be builtin:<spec> or file:<path>")
    k = len(names)
    model, add_safe = _build_model(args, k, len(alphabet))
    if add_safe:
        names = names + ["safe-uniform"]
        if experts is not None:
            experts = experts + [uniform_expert(len(alphabet))]
        else:
            # The safe expert is uniform, so its realized probability is known.
            safe = np.full((matrix.shape[0], 1), -math.log(len(alphabet)))
            matrix = np.concatenate([matrix, safe], axis=1)
    return alphabet, data, names, experts, matrix, model


def _open_out(args):
    if args.out:
        return open(args.out, "w", encoding="utf-8", newline="\n")
    return sys.stdout


def _cmd_evaluate(args) -> int:
    alphabet, data, names, experts, matrix, model = _load_inputs(args)
    hook = trimming_hook(args.trim) if args.trim is not None else None
    full = experts is not None
    fp = ForwardPass(model, experts, logpred_matrix=matrix, frontier_hook=hook,
                     want_outcome_dists=full, keep_steps=False)
    out = _open_out(args)
    json_mode = args.format == "json"
    cum = 0.0
    try:
        # Rows are written as they are produced; memory stays bounded by
        # the frontier regardless of the stream length.
        if json_mode:
            out.write('{\n"steps": [')
        else:
            cols = ["step", "symbol"]
            if full:
                cols += [f"p_out:{s}" for s in alphabet.symbols]
            cols += [f"p_exp:{nm}" for nm in names] + ["bits", "cum_bits"]
            out.write(",".join(cols) + "\n")
        for i, x in enumerate(data):
            log_cond = fp.advance(x)
            step = fp.last_step
            bits = to_bits(log_cond)
            cum += bits
            expert_dist = np.exp(step.expert_dist)
            outcome_dist = np.exp(step.outcome_dist) if full else None
            if json_mode:
                entry = {"step": i + 1, "symbol": alphabet.symbols[x],
                         "bits": float(_fmt(bits)), "cum_bits": float(_fmt(cum)),
                         "next_expert": {nm: float(_fmt(v))
                                         for nm, v in zip(names, expert_dist)}}
                if full:
                    entry["next_outcome"] = {s: float(_fmt(v))
                                             for s, v in zip(alphabet.symbols, outcome_dist)}
                out.write(("," if i else "") + "\n" + json.dumps(entry, sort_keys=True))
            else:
                cells = [str(i + 1), alphabet.symbols[x]]
                if full:
                    cells += [_fmt(v) for v in outcome_dist]
                cells += [_fmt(v) for v in expert_dist]
                cells += [_fmt(bits), _fmt(cum)]
                out.write(",".join(cells) + "\n")
        if json_mode:
            out.write(f'\n],\n"n": {len(data)},\n"total_bits": {_fmt(cum)}\n}}\n')
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_posterior(args) -> int:
    if args.trim is not None:
        raise UnsupportedError("--trim is not supported with posterior (the backward pass is exact)")
    alphabet, data, names, experts, matrix, model = _load_inputs(args)
    grid = posterior_experts(model, experts, data, logpred_matrix=matrix)
    probs = np.exp(grid)
    out = _open_out(args)
    try:
        if args.format == "json":
            payload = [{nm: float(_fmt(v)) for nm, v in zip(names, row)} for row in probs]
            json.dump(payload, out, indent=2, sort_keys=True)
            out.write("\n")
        else:
            out.write(",".join(names) + "\n")
            for row in probs:
                out.write(",".join(_fmt(v) for v in row) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_map(args) -> int:
    if args.model != "switch":
        raise UnsupportedError(
            f"MAP decoding is implemented for the switch model only, not {args.model!r}")
    if args.trim is not None:
        raise UnsupportedError("--trim does not apply to MAP decoding")
    alphabet, data, names, experts, matrix, model = _load_inputs(args)
    cfg = models.SwitchConfig(args.theta, _parse_pi_t(args.pi_t),
                              tuple(_weights(args.weights, len(names))))
    res = switch_map(cfg, experts, data, logpred_matrix=matrix)
    out = _open_out(args)
    try:
        if args.format == "json":
            json.dump({"sequence": [names[x] for x in res.sequence],
                       "map_bits": float(_fmt(to_bits(res.log_probability))) if data else 0.0},
                      out, indent=2, sort_keys=True)
            out.write("\n")
        else:
            for x in res.sequence:
                out.write(names[x] + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_bounds(args) -> int:
    alphabet, data, names, experts, matrix, model = _load_inputs(args)
    if not data:
        raise InputError("bounds need a nonempty data file")
    if experts is not None:
        from .experts import prediction_matrix
        lp = prediction_matrix(experts, data)
    else:
        lp = matrix[: len(data)]
    k = len(names)
    w = _weights(args.weights, k if args.model != "overconfident" else k - 1)

    def marginal_of(m) -> float:
        fp = ForwardPass(m, experts, logpred_matrix=matrix)
        for x in data:
            fp.advance(x)
        return fp.log_marginal

    name = args.model
    limit = args.max_blocks or len(data)
    if name == "bayes":
        reports = [bnd.measure_bayes(marginal_of(model), lp, w)]
    elif name == "fixed-share":
        reports = bnd.measure_fixed_share(
            lambda a: marginal_of(models.fixed_share(w, a)), lp, k)[:limit]
    elif name == "universal-share":
        reports = [bnd.measure_universal_share(marginal_of(model), lp, w, grid=args.grid)]
    elif name == "switch":
        reports = bnd.measure_switch(marginal_of(model), lp, k)[:limit]
    elif name == "run-length":
        reports = bnd.measure_run_length(marginal_of(model), lp, k)[:limit]
    elif name == "universal-elementwise":
        reports = [bnd.measure_unimix(marginal_of(model), lp, c=args.unimix_c, grid=args.grid)]
    else:
        raise UnsupportedError(f"no bound report is defined for model {name!r}")

    out = _open_out(args)
    try:
        if args.format == "json":
            payload = [{"model": r.model, "comparator": r.comparator,
                        "measured_bits": float(_fmt(r.measured_bits)),
                        "bound_bits": float(_fmt(r.bound_bits)),
                        "satisfied": bool(r.satisfied), "note": r.note,
                        "inputs": {kk: (float(_fmt(v)) if isinstance(v, float) else v)
                                   for kk, v in r.inputs.items()}}
                       for r in reports]
            json.dump(payload, out, indent=2, sort_keys=True)
            out.write("\n")
        else:
            out.write("model,comparator,measured_bits,bound_bits,satisfied,note\n")
            for r in reports:
                out.write(",".join([r.model, '"' + r.comparator + '"',
                                    _fmt(r.measured_bits), _fmt(r.bound_bits),
                                    "yes" if r.satisfied else "no", r.note]) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expertseq",
        description="Online evaluation of expert-combination models over expert-sequence priors.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, fn in [("evaluate", _cmd_evaluate), ("posterior", _cmd_posterior),
                    ("map", _cmd_map), ("bounds", _cmd_bounds)]:
        p = sub.add_parser(cmd)
        p.set_defaults(func=fn)
        p.add_argument("data", help="data file, one symbol per line")
        p.add_argument("--model", required=True,
                       choices=["bayes", "fixed-elementwise", "universal-elementwise",
                                "fixed-share", "universal-share", "overconfident",
                                "switch", "run-length"])
        p.add_argument("--alphabet", required=True, help="comma-separated outcome symbols")
        p.add_argument("--experts", required=True,
                       help="builtin:<spec>(;<spec>...) or file:<path>")
        p.add_argument("--advice-mode", choices=["full", "realized"], default="full")
        p.add_argument("--weights", default=None,
                       help="comma-separated expert weights (default uniform)")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--theta", type=float, default=0.5)
        p.add_argument("--pi-t", dest="pi_t", default="inv-poly",
                       help="inv-poly | geometric:<r> | uniform:<a>,<b> | elias")
        p.add_argument("--trim", type=float, default=None,
                       help="retained frontier mass fraction in (0, 1]")
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        if cmd == "bounds":
            p.add_argument("--grid", type=int, default=1024)
            p.add_argument("--unimix-c", dest="unimix_c", type=float, default=1.1)
            p.add_argument("--max-blocks", dest="max_blocks", type=int, default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else int(e.code or 0)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ZeroMarginalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except UnsupportedError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
