"""Command-line driver: generate synthetic studies, run checks, merge reports.

Configuration is a flat ``key = value`` text file (``#`` starts a comment).
Recognized keys are documented in the README; presets fill in defaults that
explicit entries override.  Exit codes: 0 when every check passes, 2 when
any check fails, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from causalcheck import __version__
from causalcheck.core import (
    Dataset,
    PotentialOutcomeTable,
    dataset_validate,
    load_dataset_csv,
    purpose_rng,
    purpose_seedseq,
    write_dataset_csv,
)
from causalcheck.discrepancy import DiscrepancySpec, constant_propensities
from causalcheck.inference import (
    SamplerConfig,
    export_draws_csv,
    fit_assignment,
    fit_outcome,
    import_draws_csv,
)
from causalcheck.models import AssignmentFamily, OutcomeFamily
from causalcheck.ppc import check_assignment, check_outcome, check_result_to_json
from causalcheck.presets import PRESET_NAMES, load_preset_dataset, preset_defaults
from causalcheck.report import histogram_svg, write_summary
from causalcheck.synthgen import ScenarioConfig, generate

__all__ = ["main", "cmd_generate", "cmd_check", "cmd_report", "RunConfig", "load_run_config"]


def parse_config_file(path: str | Path) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def _as_bool(value: str) -> bool:
    if value.lower() in ("true", "yes", "1", "on"):
        return True
    if value.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _as_floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip() != "")


@dataclass
class RunConfig:
    raw: dict[str, str]
    dataset_source: str = "synthetic"
    out_dir: Path = Path("results")
    seed: int = 0
    alpha: float = 0.05
    svg: bool = False
    workers: int = 1
    holdout_fraction: float | None = None
    known_propensity: float | None = None
    checks: list[DiscrepancySpec | str] = field(default_factory=list)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.raw.get(key, default)


def load_run_config(
    config_path: str | Path | None,
    out: str | None = None,
    seed: int | None = None,
    svg: bool | None = None,
) -> RunConfig:
    raw = parse_config_file(config_path) if config_path else {}
    source = raw.get("dataset", "synthetic")
    if source.startswith("preset:"):
        defaults = preset_defaults(source.split(":", 1)[1])
        raw = {**defaults, **raw}
    cfg = RunConfig(raw=raw, dataset_source=source)
    cfg.out_dir = Path(out if out is not None else raw.get("out", "results"))
    cfg.seed = int(seed if seed is not None else raw.get("seed", "0"))
    cfg.alpha = float(raw.get("alpha", "0.05"))
    cfg.svg = svg if svg is not None else _as_bool(raw.get("svg", "false"))
    cfg.workers = int(raw.get("workers", "1"))
    if "holdout_fraction" in raw:
        frac = float(raw["holdout_fraction"])
        if not 0.0 < frac < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        cfg.holdout_fraction = frac
    if "known_propensity" in raw:
        cfg.known_propensity = float(raw["known_propensity"])
    cfg.checks = _parse_checks(raw.get("checks", ""))
    return cfg


def _parse_checks(spec: str):
    checks = []
    seen = set()
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if item == "assignment_log_score":
            entry = "assignment_log_score"
            label = entry
        else:
            kind, _, mode = item.partition(":")
            entry = DiscrepancySpec(kind=kind.strip(), realization_mode=(mode or "ipw").strip())
            label = entry.label
        if label in seen:
            raise ValueError(f"check {label!r} listed more than once")
        seen.add(label)
        checks.append(entry)
    return checks


# ---------------------------------------------------------------------------
# Dataset and family resolution
# ---------------------------------------------------------------------------


def _load_dataset(cfg: RunConfig) -> Dataset:
    source = cfg.dataset_source
    if source == "synthetic":
        data, _ = generate(_scenario_config(cfg))
        return data
    if source.startswith("csv:"):
        path = Path(source.split(":", 1)[1])
        if not path.exists():
            raise FileNotFoundError(f"dataset csv not found: {path}")
        return load_dataset_csv(path)
    if source.startswith("preset:"):
        return load_preset_dataset(source.split(":", 1)[1])
    raise ValueError(
        f"unknown dataset source {source!r}; use synthetic, csv:<path>, or preset:<name>"
    )


def _scenario_config(cfg: RunConfig) -> ScenarioConfig:
    raw = cfg.raw
    d = int(raw.get("synthetic.d", "10"))
    kwargs = dict(
        n=int(raw.get("synthetic.n", "10000")),
        d=d,
        scenario=raw.get("synthetic.scenario", "fiction"),
        true_sigma2=float(raw.get("synthetic.sigma2", "1.0")),
        assignment_shift=float(raw.get("synthetic.assignment_shift", "0.0")),
        seed=cfg.seed,
    )
    if "synthetic.true_phi" in raw:
        kwargs["true_phi"] = np.asarray(_as_floats(raw["synthetic.true_phi"]))
    if "synthetic.true_theta" in raw:
        kwargs["true_theta"] = np.asarray(_as_floats(raw["synthetic.true_theta"]))
    return ScenarioConfig(**kwargs)


def _resolve_columns(value: str | None, data: Dataset):
    if value is None:
        return None
    cols = []
    for token in value.split(","):
        token = token.strip()
        if not token:
            continue
        if token in data.covariate_names:
            cols.append(data.covariate_names.index(token))
        else:
            cols.append(int(token))
    return tuple(cols)


def _assignment_family(cfg: RunConfig, data: Dataset) -> AssignmentFamily:
    raw = cfg.raw
    kwargs = dict(
        kind=raw.get("assignment.kind", "bernoulli_logistic"),
        design=_resolve_columns(raw.get("assignment.design"), data),
        includes_intercept=_as_bool(raw.get("assignment.intercept", "false")),
    )
    if "assignment.shift" in raw:
        kwargs["shift"] = float(raw["assignment.shift"])
    return AssignmentFamily(**kwargs)


def _outcome_family(cfg: RunConfig, data: Dataset) -> OutcomeFamily:
    raw = cfg.raw
    kwargs = dict(
        kind=raw.get("outcome.kind", "gaussian_linear"),
        design=_resolve_columns(raw.get("outcome.design"), data),
        includes_intercept=_as_bool(raw.get("outcome.intercept", "false")),
        drop_columns=_resolve_columns(raw.get("outcome.drop"), data) or (),
        shared_effect=_as_bool(raw.get("outcome.shared_effect", "false")),
        shared_intercept=_as_bool(raw.get("outcome.shared_intercept", "false")),
    )
    if "outcome.variance_prior" in raw:
        shape, rate = _as_floats(raw["outcome.variance_prior"])
        kwargs["variance_prior"] = (shape, rate)
    return OutcomeFamily(**kwargs)


def _sampler_config(cfg: RunConfig) -> SamplerConfig:
    raw = cfg.raw
    return SamplerConfig(
        draws_S=int(raw.get("sampler.draws", "1000")),
        burn_in=int(raw.get("sampler.burn_in", "2000")),
        chains=int(raw.get("sampler.chains", "4")),
        step_scale=float(raw.get("sampler.step_scale", "0.5")),
        adapt_target=float(raw.get("sampler.adapt_target", "0.30")),
        seed=cfg.seed,
    )


def _subset(data: Dataset, idx: np.ndarray) -> Dataset:
    from causalcheck.core import PairStructure

    ps = data.pair_structure
    return Dataset(
        covariates=data.covariates[idx],
        assignments=data.assignments[idx],
        observed_outcomes=data.observed_outcomes[idx],
        offsets=None if data.offsets is None else data.offsets[idx],
        pair_structure=None
        if ps is None
        else PairStructure(pair_ids=ps.pair_ids[idx], grades=ps.grades[idx]),
        covariate_names=data.covariate_names,
    )


def _load_truth_table(cfg: RunConfig) -> PotentialOutcomeTable | None:
    path = cfg.get("truth_json")
    if path is None:
        return None
    doc = json.loads(Path(path).read_text())
    return PotentialOutcomeTable(
        y0=np.asarray(doc["table"]["y0"], dtype=float),
        y1=np.asarray(doc["table"]["y1"], dtype=float),
    )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> int:
    if not cfg.dataset_source == "synthetic":
        raise ValueError("generate requires dataset = synthetic")
    scen = _scenario_config(cfg)
    data, truth = generate(scen)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.out_dir / "dataset.csv"
    write_dataset_csv(data, csv_path)
    truth_doc = {
        "scenario": scen.scenario,
        "observable": truth.observable,
        "true_params": truth.true_params,
        "true_propensities": [float(v) for v in truth.true_propensities],
        "table": {
            "y0": [float(v) for v in truth.table.y0],
            "y1": [float(v) for v in truth.table.y1],
        },
    }
    truth_path = cfg.out_dir / "truth.json"
    truth_path.write_text(json.dumps(truth_doc, sort_keys=True, indent=2) + "\n")
    print(f"wrote {csv_path}")
    print(f"wrote {truth_path}")
    return 0


def _fit_models(cfg: RunConfig, data: Dataset, needs_phi: bool, needs_theta: bool):
    sampler = _sampler_config(cfg)
    diagnostics: dict[str, dict] = {}
    phi_fit = theta_fit = None
    if needs_phi:
        if cfg.get("import.phi_draws"):
            draws, names = import_draws_csv(cfg.raw["import.phi_draws"])
            phi_fit = ("imported", draws, names)
        else:
            family = _assignment_family(cfg, data)
            fit, diag = fit_assignment(family, data, sampler)
            phi_fit = ("fitted", fit.draws, fit.names)
            diagnostics["assignment"] = _diag_doc(diag)
    if needs_theta:
        if cfg.get("import.theta_draws"):
            draws, names = import_draws_csv(cfg.raw["import.theta_draws"])
            theta_fit = ("imported", draws, names)
        else:
            family = _outcome_family(cfg, data)
            fit, diag = fit_outcome(family, data, sampler)
            theta_fit = ("fitted", fit.draws, fit.names)
            diagnostics["outcome"] = _diag_doc(diag)
    return phi_fit, theta_fit, diagnostics


def _diag_doc(diag) -> dict:
    return {
        "ess_min": float(np.min(diag.ess)),
        "rhat_max": float(np.max(diag.rhat)),
        "acceptance_rate": list(diag.acceptance_rate),
        "warnings": list(diag.warnings),
    }


def _check_filename(check) -> str:
    if check == "assignment_log_score":
        return "check_assignment_log_score"
    return f"check_{check.kind}_{check.realization_mode}"


def cmd_check(cfg: RunConfig) -> int:
    if not cfg.checks:
        raise ValueError("config lists no checks")
    data = _load_dataset(cfg)
    report = dataset_validate(data)
    if not report.ok:
        for issue in report.issues:
            print(f"validation: {issue}", file=sys.stderr)
        raise ValueError("dataset failed validation")

    has_assignment_check = any(c == "assignment_log_score" for c in cfg.checks)
    needs_ipw_phi = any(
        isinstance(c, DiscrepancySpec) and c.realization_mode == "ipw" for c in cfg.checks
    ) and cfg.known_propensity is None
    needs_theta = any(isinstance(c, DiscrepancySpec) for c in cfg.checks)
    phi_fit, theta_fit, diagnostics = _fit_models(
        cfg, data, needs_phi=needs_ipw_phi or (has_assignment_check and cfg.holdout_fraction is None),
        needs_theta=needs_theta,
    )

    # Held-out assignment evaluation: fit on the training split, score the
    # held-out assignments (avoids criticizing with the data that trained
    # the model).  The outcome side keeps the full-data fit.
    holdout_phi = None
    holdout_data = None
    if has_assignment_check and cfg.holdout_fraction is not None:
        rng = purpose_rng(cfg.seed, "misc")
        idx = rng.permutation(data.n)
        n_hold = int(round(cfg.holdout_fraction * data.n))
        hold_idx = np.sort(idx[:n_hold])
        train_idx = np.sort(idx[n_hold:])
        family = _assignment_family(cfg, data)
        fit, diag = fit_assignment(family, _subset(data, train_idx), _sampler_config(cfg))
        holdout_phi = fit.draws
        holdout_data = _subset(data, hold_idx)
        diagnostics["assignment_holdout"] = _diag_doc(diag)

    truth_table = _load_truth_table(cfg)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)

    if _as_bool(cfg.get("export_draws", "false")):
        if phi_fit is not None:
            export_draws_csv(phi_fit[1], phi_fit[2], out / "phi_draws.csv")
        if theta_fit is not None:
            export_draws_csv(theta_fit[1], theta_fit[2], out / "theta_draws.csv")

    rep_seq = purpose_seedseq(cfg.seed, "replication")
    check_rngs = [np.random.Generator(np.random.PCG64(s)) for s in rep_seq.spawn(len(cfg.checks))]

    any_fail = False
    s_value = cfg.get("check.S")
    S = int(s_value) if s_value else None
    for i, check in enumerate(cfg.checks):
        if check == "assignment_log_score":
            family = _assignment_family(cfg, data)
            if cfg.holdout_fraction is not None:
                result = check_assignment(
                    family, holdout_data, holdout_phi, S=S, rng=check_rngs[i],
                    alpha=cfg.alpha, workers=cfg.workers,
                )
            else:
                result = check_assignment(
                    family, data, phi_fit[1], S=S, rng=check_rngs[i],
                    alpha=cfg.alpha, workers=cfg.workers,
                )
        else:
            family = _outcome_family(cfg, data)
            kwargs = dict(S=S, rng=check_rngs[i], alpha=cfg.alpha, workers=cfg.workers)
            if check.realization_mode == "ipw":
                if cfg.known_propensity is not None:
                    kwargs["propensity"] = constant_propensities(
                        cfg.known_propensity, data.assignments
                    )
                else:
                    kwargs["assignment_family"] = _assignment_family(cfg, data)
                    kwargs["phi_draws"] = phi_fit[1]
            elif check.realization_mode == "oracle":
                if truth_table is None:
                    raise ValueError("oracle realization needs truth_json in the config")
                kwargs["table"] = truth_table
            result = check_outcome(family, data, theta_fit[1], check, **kwargs)

        name = _check_filename(check)
        result.metadata["seed"] = cfg.seed
        (out / f"{name}.json").write_text(check_result_to_json(result, seed=cfg.seed))
        if cfg.svg:
            (out / f"{name}.svg").write_text(histogram_svg(result, title=name[6:]))
        label = check if isinstance(check, str) else check.label
        print(f"{label}: tail_prob={result.tail_prob:.4f} verdict={result.verdict}")
        for w in result.metadata.get("warnings", []):
            print(f"  warning: {w}")
        any_fail = any_fail or result.verdict == "fail"

    stamp = {
        "package": "causalcheck",
        "version": __version__,
        "seed": cfg.seed,
        "config": dict(sorted(cfg.raw.items())),
        "fits": diagnostics,
    }
    (out / "diagnostics.json").write_text(json.dumps(stamp, sort_keys=True, indent=2) + "\n")
    for section, doc in diagnostics.items():
        for w in doc["warnings"]:
            print(f"  {section} fit warning: {w}")
    return 2 if any_fail else 0


def cmd_report(cfg: RunConfig) -> int:
    out_dir = cfg.out_dir
    if not out_dir.exists():
        raise FileNotFoundError(f"results directory does not exist: {out_dir}")
    overall = write_summary(out_dir)
    print(f"overall: {overall} (summary.json, index.html in {out_dir})")
    return 2 if overall == "fail" else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="causalcheck",
        description="Posterior predictive criticism for Bayesian causal models",
    )
    parser.add_argument("command", choices=["generate", "check", "report"])
    parser.add_argument("--config", type=str, default=None, help="flat key=value config file")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="64-bit run seed")
    parser.add_argument("--svg", action="store_true", default=None, help="emit SVG histograms")
    args = parser.parse_args(argv)

    try:
        cfg = load_run_config(args.config, out=args.out, seed=args.seed, svg=args.svg)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "check":
            return cmd_check(cfg)
        return cmd_report(cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
