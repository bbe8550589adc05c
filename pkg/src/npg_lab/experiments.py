"""Experiment specs, presets, run orchestration and trace persistence."""

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from npg_lab import _kernels as K
from npg_lab.bandit import BanditInstance, k20_bandit_instance
from npg_lab.diagnostics import record_schedule
from npg_lab.errors import NumericalFailure
from npg_lab.mdp import (
    TabularMdp,
    adversarial_tree_init,
    deterministic_structure,
    evaluate_policy,
    optimal_policy,
    stochastic_npg_step,
    tree_mdp,
)
from npg_lab.policy import PolicyParams, policy_table
from npg_lab.rng import make_rng
from npg_lab.updates import AdaptiveStep, ConstantStep, EstimatorKind, UpdateConfig

log = logging.getLogger(__name__)

CHUNK = 1 << 18
MONO_TOL = 1e-12
MDP_MONO_TOL = 1e-10
MDP_ESCAPE_GAP = 0.01

BANDIT_COLUMNS = ("t", "expected_reward", "gap", "pi_opt", "eta_t")
COMMITTAL_COLUMNS = ("t", "pi_a", "complement")
MDP_COLUMNS = ("t", "v_rho", "v_mu", "gap_rho", "min_pi_opt")


@dataclass(frozen=True)
class InitSpec:
    """``kind`` is ``uniform``, ``adversarial`` or ``explicit``.

    Bandit adversarial inits and explicit inits take ``logits``; MDP adversarial
    inits put ``opt_prob`` on the optimal action in every state.
    """

    kind: str = "uniform"
    logits: tuple = None
    opt_prob: float = 0.07

    def __post_init__(self):
        if self.kind not in ("uniform", "adversarial", "explicit"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.kind == "explicit" and self.logits is None:
            raise ValueError("explicit init needs logits")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    environment: object
    init: InitSpec = field(default_factory=InitSpec)
    update: UpdateConfig = None
    eta: float = 0.1
    seeds: tuple = (0,)
    iterations: int = 1000
    outputs: str = None
    forced_action: int = None
    escape_gap: float = None
    n_log: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.is_bandit:
            if self.update is None:
                raise ValueError("bandit experiments need an UpdateConfig")
            if self.forced_action is not None:
                if self.update.estimator is not EstimatorKind.SIMPLIFIED_IS:
                    raise ValueError("forced-action runs use the simplified estimator")
                if not 0 <= self.forced_action < self.environment.K:
                    raise ValueError("forced_action out of range")
        elif isinstance(self.environment, TabularMdp):
            if not self.eta > 0:
                raise ValueError("eta must be positive")
            if self.forced_action is not None:
                raise ValueError("forced sampling is only defined for bandits")
        else:
            raise TypeError("environment must be a BanditInstance or a TabularMdp")

    @property
    def is_bandit(self):
        return isinstance(self.environment, BanditInstance)

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class RunSummary:
    name: str
    seed: int
    iterations: int
    final_value: float
    final_gap: float
    min_opt_prob: float
    escaped_plateau: bool
    escape_time: int
    monotone_violations: int
    worst_drop: float
    failure: dict = None
    trace_path: str = None

    @property
    def failed(self):
        return self.failure is not None


@dataclass
class RunResult:
    summary: RunSummary
    columns: tuple
    trace: np.ndarray


# ----------------------------------------------------------------------------
# presets


def _adversarial_bandit_logits(K=20, index=1, value=5.0):
    theta = np.zeros(K)
    theta[index] = value
    return tuple(theta)


def _failure_spec(baseline):
    return ExperimentSpec(
        name="failure-baseline" if baseline else "failure-no-baseline",
        environment=BanditInstance.deterministic([1.0, 0.9]),
        update=UpdateConfig(EstimatorKind.SIMPLIFIED_IS, baseline=baseline, step=ConstantStep(2.0)),
        seeds=tuple(range(200)),
        iterations=100_000,
        n_log=100,
    )


def preset(name):
    """Named experiment configurations."""
    if name == "bandit-uniform-deterministic":
        return ExperimentSpec(
            name=name,
            environment=k20_bandit_instance(),
            update=UpdateConfig(EstimatorKind.SIMPLIFIED_IS, True, ConstantStep(0.1)),
            seeds=tuple(range(20)),
            iterations=1_000_000,
        )
    if name == "bandit-adversarial-stochastic":
        return ExperimentSpec(
            name=name,
            environment=k20_bandit_instance(),
            init=InitSpec("adversarial", logits=_adversarial_bandit_logits()),
            update=UpdateConfig(
                EstimatorKind.STOCHASTIC_IS, True, AdaptiveStep(4.0, scale=0.5, denominator=9.0)
            ),
            seeds=tuple(range(5)),
            iterations=20_000_000,
        )
    if name == "tree-adversarial":
        return ExperimentSpec(
            name=name,
            environment=tree_mdp(),
            init=InitSpec("adversarial", opt_prob=0.07),
            eta=0.1,
            seeds=(0,),
            iterations=10_000_000,
        )
    if name == "failure-no-baseline":
        return _failure_spec(False)
    if name == "failure-baseline":
        return _failure_spec(True)
    if name in ("committal-no-baseline", "committal-baseline"):
        baseline = name == "committal-baseline"
        return ExperimentSpec(
            name=name,
            environment=BanditInstance.deterministic([1.0, 0.0]),
            update=UpdateConfig(EstimatorKind.SIMPLIFIED_IS, baseline, ConstantStep(1.0)),
            forced_action=0,
            iterations=1_000_000 if baseline else 300,
        )
    raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")


PRESETS = (
    "bandit-uniform-deterministic",
    "bandit-adversarial-stochastic",
    "tree-adversarial",
    "failure-no-baseline",
    "failure-baseline",
    "committal-no-baseline",
    "committal-baseline",
)


# ----------------------------------------------------------------------------
# JSON round trip


def _step_to_dict(step):
    if isinstance(step, AdaptiveStep):
        return {"adaptive": {"r_max": step.r_max, "scale": step.scale, "denominator": step.denom}}
    return {"constant": step.eta}


def _step_from_dict(doc):
    if "constant" in doc:
        return ConstantStep(float(doc["constant"]))
    a = doc["adaptive"]
    return AdaptiveStep(float(a["r_max"]), float(a.get("scale", 1.0)), a.get("denominator"))


def _environment_from_dict(doc):
    kind = doc["kind"]
    if kind == "bandit":
        if doc.get("preset") == "k20":
            return k20_bandit_instance(doc.get("r_max", 4.0))
        return BanditInstance.from_json(doc["instance"])
    if kind == "mdp":
        if doc.get("preset") == "tree":
            opts = {k: v for k, v in doc.items() if k not in ("kind", "preset")}
            return tree_mdp(**opts)
        return TabularMdp.from_json(doc["instance"])
    raise ValueError(f"unknown environment kind {kind!r}")


def spec_to_dict(spec):
    env = spec.environment
    doc = {
        "name": spec.name,
        "environment": (
            {"kind": "bandit", "instance": json.loads(env.to_json())}
            if spec.is_bandit
            else {"kind": "mdp", "instance": json.loads(env.to_json())}
        ),
        "init": {k: v for k, v in asdict(spec.init).items() if v is not None},
        "seeds": list(spec.seeds),
        "iterations": spec.iterations,
    }
    if spec.is_bandit:
        doc["update"] = {
            "estimator": spec.update.estimator.value,
            "baseline": spec.update.baseline,
            "step": _step_to_dict(spec.update.step),
        }
    else:
        doc["eta"] = spec.eta
    for key in ("outputs", "forced_action", "escape_gap"):
        if getattr(spec, key) is not None:
            doc[key] = getattr(spec, key)
    doc["n_log"] = spec.n_log
    if "logits" in doc["init"]:
        doc["init"]["logits"] = list(doc["init"]["logits"])
    return doc


def spec_from_dict(doc):
    init = doc.get("init", "uniform")
    if isinstance(init, str):
        init = {"kind": init}
    logits = init.get("logits")
    init = InitSpec(
        init["kind"],
        logits=None if logits is None else tuple(np.asarray(logits, dtype=float).ravel().tolist()),
        opt_prob=init.get("opt_prob", 0.07),
    )
    update = None
    if "update" in doc:
        u = doc["update"]
        update = UpdateConfig(
            EstimatorKind(u.get("estimator", "simplified")),
            bool(u.get("baseline", True)),
            _step_from_dict(u.get("step", {"constant": 0.1})),
        )
    seeds = doc.get("seeds", [0])
    if isinstance(seeds, dict):
        seeds = range(seeds.get("start", 0), seeds.get("start", 0) + seeds["count"])
    return ExperimentSpec(
        name=doc["name"],
        environment=_environment_from_dict(doc["environment"]),
        init=init,
        update=update,
        eta=float(doc.get("eta", 0.1)),
        seeds=tuple(seeds),
        iterations=int(doc["iterations"]),
        outputs=doc.get("outputs"),
        forced_action=doc.get("forced_action"),
        escape_gap=doc.get("escape_gap"),
        n_log=int(doc.get("n_log", 1000)),
    )


def load_spec(name_or_path):
    """A preset name or a path to a JSON spec file."""
    if name_or_path in PRESETS:
        return preset(name_or_path)
    return spec_from_dict(json.loads(Path(name_or_path).read_text()))


# ----------------------------------------------------------------------------
# single runs


def initial_params(spec):
    env = spec.environment
    shape = (1, env.K) if spec.is_bandit else (env.S, env.A)
    init = spec.init
    if init.kind == "uniform":
        return PolicyParams(np.zeros(shape))
    if init.kind == "adversarial" and not spec.is_bandit:
        return adversarial_tree_init(env, init.opt_prob)
    if init.logits is None:
        raise ValueError("bandit adversarial init needs an explicit logit table")
    theta = np.asarray(init.logits, dtype=np.float64).reshape(shape)
    return PolicyParams(theta - theta.mean(axis=1, keepdims=True))


def _bandit_arrays(inst, step):
    vals, cum, lens = inst.support_arrays()
    if isinstance(step, AdaptiveStep):
        return vals, cum, lens, True, 0.0, step.scale, step.denom
    return vals, cum, lens, False, float(step.eta), 1.0, 1.0


def run_bandit(spec, rng):
    """Thinned bandit trace ``(t, expected_reward, gap, pi_track, eta_t, complement)`` and stats."""
    inst, cfg = spec.environment, spec.update
    theta = initial_params(spec).logits[0].copy()
    vals, cum, lens, adaptive, eta_c, scale, denom = _bandit_arrays(inst, cfg.step)
    forced = -1 if spec.forced_action is None else int(spec.forced_action)
    track = inst.best_action if forced < 0 else forced
    escape_gap = inst.gap / 2.0 if spec.escape_gap is None else spec.escape_gap
    rec_t = record_schedule(spec.iterations, spec.n_log)
    out = np.full((rec_t.size, 6), np.nan)
    stats = K.new_bandit_stats()
    stochastic = cfg.estimator is EstimatorKind.STOCHASTIC_IS
    pos, t = 0, 1
    while t <= spec.iterations:
        n = min(CHUNK, spec.iterations - t + 1)
        u = np.zeros((n, 2)) if forced >= 0 else rng.random((n, 2))
        final = t + n - 1 == spec.iterations
        pos = K.bandit_chunk(
            theta, inst.r, vals, cum, lens,
            stochastic, cfg.baseline, adaptive, eta_c, scale, denom,
            forced, track, escape_gap, MONO_TOL,
            u, t, n, final, rec_t, pos, out, stats,
        )
        if stats[K.B_STATUS] != K.STATUS_OK:
            break
        t += n
    return out[:pos], stats, theta


def _bandit_summary(spec, seed, trace, stats):
    failure = None
    if stats[K.B_STATUS] != K.STATUS_OK:
        failure = NumericalFailure(
            "non-finite logit after bandit update",
            t=int(stats[K.B_FAIL_T]),
            action=int(stats[K.B_FAIL_A]),
            eta=float(stats[K.B_FAIL_ETA]),
        ).as_dict()
    last = trace[-1] if trace.size else np.full(6, np.nan)
    esc = int(stats[K.B_ESCAPE_T])
    return RunSummary(
        name=spec.name,
        seed=seed,
        iterations=spec.iterations,
        final_value=float(last[1]),
        final_gap=float(last[2]),
        min_opt_prob=float(stats[K.B_MIN_PI]),
        escaped_plateau=esc >= 0,
        escape_time=esc,
        monotone_violations=int(stats[K.B_N_VIOL]),
        worst_drop=float(stats[K.B_WORST_DROP]),
        failure=failure,
    )


def run_tree(spec, rng, structure):
    """Stochastic NPG on a deterministic tree-like MDP through the compiled evaluator."""
    mdp = spec.environment
    nxt, order = structure
    pi_star, star = optimal_policy(mdp)
    a_star = np.argmax(pi_star, axis=1).astype(np.int64)
    theta = initial_params(spec).logits.copy()
    rec_t = record_schedule(spec.iterations, spec.n_log)
    out = np.full((rec_t.size, 5), np.nan)
    stats = K.new_mdp_stats()
    escape_gap = MDP_ESCAPE_GAP if spec.escape_gap is None else spec.escape_gap
    v_prev = np.zeros(mdp.S)
    have_prev = False
    pos, t = 0, 1
    while t <= spec.iterations:
        n = min(CHUNK, spec.iterations - t + 1)
        u = rng.random((n, 2))
        final = t + n - 1 == spec.iterations
        pos, have_prev = K.tree_chunk(
            theta, np.ascontiguousarray(mdp.r), nxt, order, mdp.gamma,
            np.ascontiguousarray(mdp.mu), np.ascontiguousarray(mdp.rho),
            a_star, star.value(mdp.rho), spec.eta, escape_gap, MDP_MONO_TOL,
            u, t, n, final, rec_t, pos, out, stats, v_prev, have_prev,
        )
        if stats[K.M_STATUS] != K.STATUS_OK:
            break
        t += n
    return out[:pos], stats, theta


def run_mdp_dense(spec, rng):
    """Stochastic NPG with a dense linear solve per step; for general (stochastic) MDPs."""
    mdp = spec.environment
    pi_star, star = optimal_policy(mdp)
    a_star = np.argmax(pi_star, axis=1)
    v_star = star.value(mdp.rho)
    params = initial_params(spec)
    rec_t = set(record_schedule(spec.iterations, spec.n_log).tolist())
    escape_gap = MDP_ESCAPE_GAP if spec.escape_gap is None else spec.escape_gap
    stats = K.new_mdp_stats()
    rows = []
    v_prev = None

    def observe(t, params):
        nonlocal v_prev
        vals = evaluate_policy(mdp, policy_table(params))
        table = policy_table(params)
        min_pi = float(np.min(table[np.arange(mdp.S), a_star]))
        v_rho = vals.value(mdp.rho)
        gap = v_star - v_rho
        stats[K.M_MIN_PI] = min(stats[K.M_MIN_PI], min_pi)
        if v_prev is not None:
            drops = v_prev - vals.v
            stats[K.M_WORST_DROP] = max(stats[K.M_WORST_DROP], float(drops.max()))
            stats[K.M_N_VIOL] += int(np.sum(drops > MDP_MONO_TOL))
        v_prev = vals.v
        if stats[K.M_ESCAPE_T] < 0 and gap < escape_gap:
            stats[K.M_ESCAPE_T] = t
        if t in rec_t:
            rows.append((t, v_rho, vals.value(mdp.mu), gap, min_pi))

    for t in range(1, spec.iterations + 1):
        observe(t, params)
        try:
            params, _ = stochastic_npg_step(params, mdp, spec.eta, rng, a_star=a_star)
        except NumericalFailure as exc:
            stats[K.M_STATUS] = K.STATUS_NONFINITE
            stats[K.M_FAIL_T] = t
            stats[K.M_FAIL_S] = -1 if exc.state is None else exc.state
            stats[K.M_FAIL_A] = -1 if exc.action is None else exc.action
            break
    else:
        observe(spec.iterations + 1, params)
    return np.array(rows, dtype=np.float64).reshape(-1, 5), stats, params.logits.copy()


def _mdp_summary(spec, seed, trace, stats):
    failure = None
    if stats[K.M_STATUS] != K.STATUS_OK:
        failure = NumericalFailure(
            "non-finite logit in NPG step",
            t=int(stats[K.M_FAIL_T]),
            state=int(stats[K.M_FAIL_S]),
            action=int(stats[K.M_FAIL_A]),
            eta=spec.eta,
        ).as_dict()
    last = trace[-1] if trace.size else np.full(5, np.nan)
    esc = int(stats[K.M_ESCAPE_T])
    return RunSummary(
        name=spec.name,
        seed=seed,
        iterations=spec.iterations,
        final_value=float(last[1]),
        final_gap=float(last[3]),
        min_opt_prob=float(stats[K.M_MIN_PI]),
        escaped_plateau=esc >= 0,
        escape_time=esc,
        monotone_violations=int(stats[K.M_N_VIOL]),
        worst_drop=float(stats[K.M_WORST_DROP]),
        failure=failure,
    )


def run_single(spec, seed, seed_base=0):
    """One seeded run. The stream depends only on ``seed + seed_base``."""
    rng = make_rng(seed + seed_base)
    if spec.is_bandit:
        trace, stats, _ = run_bandit(spec, rng)
        summary = _bandit_summary(spec, seed, trace, stats)
        if spec.forced_action is not None:
            return RunResult(summary, COMMITTAL_COLUMNS, trace[:, [0, 3, 5]])
        return RunResult(summary, BANDIT_COLUMNS, trace[:, :5])
    structure = deterministic_structure(spec.environment)
    if structure is not None:
        trace, stats, _ = run_tree(spec, rng, structure)
    else:
        trace, stats, _ = run_mdp_dense(spec, rng)
    return RunResult(_mdp_summary(spec, seed, trace, stats), MDP_COLUMNS, trace)


# ----------------------------------------------------------------------------
# orchestration and persistence


def trace_to_csv(columns, trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in trace:
        w.writerow([str(int(row[0]))] + [repr(float(x)) for x in row[1:]])
    return buf.getvalue()


def read_trace_csv(path):
    """Load a trace CSV into a dict of column arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body], dtype=np.float64).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def run_experiment(spec, out_dir=None, seed_base=0, threads=1):
    """Run every seed of ``spec``; write per-run CSVs and a summary JSON when ``out_dir`` is set.

    Seeds run independently on a thread pool (the compiled kernels release the
    GIL). Results come back in seed order and each run's stream depends only on
    its seed, so outputs do not depend on ``threads``.
    """
    out_dir = out_dir if out_dir is not None else spec.outputs
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda s: run_single(spec, s, seed_base), spec.seeds))
    for res in results:
        if res.summary.failed:
            log.warning("run %s seed %d failed: %s", spec.name, res.summary.seed, res.summary.failure)
    if out_dir is not None:
        base = Path(out_dir) / spec.name
        base.mkdir(parents=True, exist_ok=True)
        for i, res in enumerate(results):
            path = base / f"run{i:03d}_seed{res.summary.seed}.csv"
            path.write_text(trace_to_csv(res.columns, res.trace))
            res.summary.trace_path = str(path.name)
        doc = {
            "spec": spec_to_dict(spec),
            "seed_base": seed_base,
            "runs": [asdict(r.summary) for r in results],
        }
        (base / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return results


def mean_gap_trace(results):
    """Mean gap across runs at the shared recorded t (failed runs excluded)."""
    ok = [r for r in results if not r.summary.failed]
    if not ok:
        raise ValueError("no completed runs")
    t = ok[0].trace[:, 0]
    gap_col = 2 if ok[0].columns == BANDIT_COLUMNS else 3
    gaps = np.vstack([r.trace[:, gap_col] for r in ok])
    return t, gaps.mean(axis=0)


def failure_rate(spec, threshold, horizon, seed_base=0, threads=1):
    """Fraction of seeds whose final ``pi(a*)`` is below ``threshold`` after ``horizon`` steps.

    A run that stops on a numerical failure never reached the optimum and counts
    as failed.
    """
    spec = replace(spec, iterations=int(horizon), n_log=2, outputs=None)
    results = run_experiment(spec, seed_base=seed_base, threads=threads)
    failed = 0
    for res in results:
        if res.summary.failed or res.trace[-1, 3] < threshold:
            failed += 1
    return failed / len(results)


def committal_trace(inst, action, baseline, eta, iterations, theta0=None, n_log=1000):
    """Forced-sampling trace: ``(t, 1 - pi_t(action))`` with the complement summed
    directly over the other actions so it never saturates at 1 - 1."""
    spec = ExperimentSpec(
        name="committal",
        environment=inst,
        init=InitSpec("uniform") if theta0 is None else InitSpec("explicit", logits=tuple(theta0)),
        update=UpdateConfig(EstimatorKind.SIMPLIFIED_IS, baseline, ConstantStep(eta)),
        forced_action=action,
        iterations=iterations,
        n_log=n_log,
    )
    trace, _, _ = run_bandit(spec, None)
    return trace[:, 0], trace[:, 5]
