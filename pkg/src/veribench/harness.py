"""Competition orchestration.

Loads benchmark manifests, runs external tools as subprocesses under
per-instance timeouts, runs the built-in sampling/gradient baseline,
measures startup overhead on generated trivial instances, calibrates
robustness radii by binary search, and writes score reports.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import shlex
import signal
import subprocess
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .bounds import affine_bounds, constraint_lower_bound
from .network import Box, NetworkError, gen_trivial_network, load_network, forward, save_network
from .scoring import RunRecord, ScoreLedger, write_results_csv
from .scoring import (
    benchmark_table_csv,
    overall_table_csv,
    render_instance_log,
    render_report,
)
from .speclang import Conjunct, MixedConstraint, NormalizedSpec, SpecError, parse_vnnlib, to_dnf
from .verifier import (
    Budget,
    EASY_VIOLATED_BUDGET,
    Status,
    falsify,
    read_witness,
    validate_witness,
    verify,
    write_witness,
)

log = logging.getLogger(__name__)

BENCHMARK_BUDGET_SECONDS = 6 * 3600.0
DEFAULT_GRACE_SECONDS = 10.0
DEFAULT_BASELINE_TOOL = "randgen"

MANIFEST_COLUMNS = ("onnx_path", "vnnlib_path", "timeout_seconds")

RESULT_TOKENS = tuple(s.value for s in Status)


class HarnessError(ValueError):
    """Bad manifests, adapter configs, or calibration requests."""


@dataclass(frozen=True)
class Instance:
    """One scoring unit: a network, a spec, and a timeout."""

    instance_id: str
    benchmark: str
    network_path: Path
    spec_path: Path
    timeout: float

    def __post_init__(self):
        object.__setattr__(self, "network_path", Path(self.network_path))
        object.__setattr__(self, "spec_path", Path(self.spec_path))
        object.__setattr__(self, "timeout", float(self.timeout))
        if self.timeout <= 0:
            raise HarnessError("non-positive timeout for %s" % self.instance_id)


@dataclass(frozen=True)
class ToolAdapter:
    """How to invoke one external tool.

    run_template is a shell-style command whose tokens may contain the
    placeholders {network}, {spec}, {timeout}, {result}; the command must
    write the result file: first line a status token, second line an
    optional witness path.
    """

    tool: str
    run_template: str
    prepare: str = ""
    mode: str = "default"

    def __post_init__(self):
        if not self.tool:
            raise HarnessError("adapter needs a tool id")
        if not self.run_template.strip():
            raise HarnessError("adapter %s needs a run command" % self.tool)

    def argv(self, network, spec, timeout, result) -> list:
        subs = {
            "{network}": str(network),
            "{spec}": str(spec),
            "{timeout}": "%g" % timeout,
            "{result}": str(result),
        }
        argv = []
        for token in shlex.split(self.run_template):
            for key, value in subs.items():
                token = token.replace(key, value)
            argv.append(token)
        return argv


# ---------------------------------------------------------------------------
# manifests

def load_manifest(path, benchmark: Optional[str] = None, require_files: bool = False) -> list:
    """Read a benchmark manifest CSV into Instances, in file order.

    Rows are ``onnx_path,vnnlib_path,timeout_seconds`` with paths
    relative to the manifest; a header row is tolerated.  The benchmark
    name defaults to the manifest's directory name.
    """
    path = Path(path)
    if not path.is_file():
        raise HarnessError("manifest not found: %s" % path)
    if benchmark is None:
        benchmark = path.resolve().parent.name
    instances = []
    totals = 0.0
    lines = path.read_text(encoding="utf-8").splitlines()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts == list(MANIFEST_COLUMNS):
            continue
        if len(parts) != 3:
            raise HarnessError("bad manifest row at %s line %d" % (path, line_no))
        net_rel, spec_rel, timeout_text = parts
        try:
            timeout = float(timeout_text)
        except ValueError:
            raise HarnessError(
                "bad timeout %r at %s line %d" % (timeout_text, path, line_no)
            ) from None
        if timeout <= 0:
            raise HarnessError(
                "non-positive timeout at %s line %d" % (path, line_no)
            )
        network_path = (path.parent / net_rel).resolve()
        spec_path = (path.parent / spec_rel).resolve()
        if require_files:
            for p in (network_path, spec_path):
                if not p.is_file():
                    raise HarnessError("instance file not found: %s" % p)
        instances.append(
            Instance(
                instance_id="%s-%s" % (network_path.stem, spec_path.stem),
                benchmark=benchmark,
                network_path=network_path,
                spec_path=spec_path,
                timeout=timeout,
            )
        )
        totals += timeout
    if not instances:
        warnings.warn("manifest %s has no instances" % path, stacklevel=2)
    if totals > BENCHMARK_BUDGET_SECONDS:
        warnings.warn(
            "benchmark %s timeouts sum to %.0f s, over the 6-hour budget"
            % (benchmark, totals),
            stacklevel=2,
        )
    return instances


def save_manifest(path, instances: Sequence[Instance]) -> None:
    """Write instances back out, paths relative to the manifest location."""
    path = Path(path)
    base = path.resolve().parent
    lines = []
    for inst in instances:
        timeout = inst.timeout
        timeout_text = "%d" % timeout if timeout == int(timeout) else repr(timeout)
        lines.append(
            "%s,%s,%s"
            % (
                os.path.relpath(inst.network_path, base),
                os.path.relpath(inst.spec_path, base),
                timeout_text,
            )
        )
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# subprocess runner

def _load_instance_problem(inst: Instance):
    net = load_network(inst.network_path)
    spec = to_dnf(parse_vnnlib(inst.spec_path.read_text(encoding="utf-8")))
    return net, spec


def _parse_result_file(path: Path):
    """Result protocol: line 1 status token, line 2 optional witness path."""
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or len(lines) > 2:
        raise HarnessError("unparseable result file %s" % path)
    token = lines[0].lower()
    if token not in RESULT_TOKENS:
        raise HarnessError("unparseable result file %s: bad status %r" % (path, lines[0]))
    witness = lines[1] if len(lines) == 2 else ""
    return Status(token), witness


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.wait(timeout=5)
    except subprocess.TimeoutExpired:  # pragma: no cover - kernel cleanup race
        pass


def run_tool(
    adapter: ToolAdapter,
    inst: Instance,
    *,
    result_dir=None,
    grace: float = DEFAULT_GRACE_SECONDS,
    strict_witness: bool = True,
) -> RunRecord:
    """Run one adapter on one instance under its timeout.

    The child runs in its own process group and the whole group is killed
    at timeout + grace.  Recorded raw time is capped at the timeout so a
    late kill cannot distort overhead minima.  A crashing adapter yields
    an ERROR record, never an exception.
    """
    if result_dir is None:
        result_dir = tempfile.mkdtemp(prefix="veribench-run-")
    result_dir = Path(result_dir)
    result_dir.mkdir(parents=True, exist_ok=True)
    result_path = result_dir / ("%s.result" % inst.instance_id)
    if result_path.exists():
        result_path.unlink()
    argv = adapter.argv(inst.network_path, inst.spec_path, inst.timeout, result_path)

    def record(status, seconds, witness=""):
        return RunRecord(
            tool=adapter.tool,
            instance_id=inst.instance_id,
            benchmark=inst.benchmark,
            status=status,
            seconds=min(seconds, inst.timeout),
            mode=adapter.mode,
            witness_path=witness,
        )

    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv,
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            start_new_session=True,
        )
    except OSError as exc:
        log.warning("adapter %s failed to launch: %s", adapter.tool, exc)
        return record(Status.ERROR, time.monotonic() - start)

    timed_out = False
    try:
        output, _ = proc.communicate(timeout=inst.timeout + grace)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_group(proc)
        output = b""
    elapsed = time.monotonic() - start
    captured = output.decode("utf-8", errors="replace") if output else ""

    if timed_out or elapsed >= inst.timeout:
        return record(Status.TIMEOUT, elapsed)

    def attach_output(reason):
        if captured:
            out_path = result_path.with_suffix(".out")
            out_path.write_text(captured, encoding="utf-8")
            log.warning("%s; captured output at %s", reason, out_path)
        else:
            log.warning("%s", reason)

    if not result_path.is_file():
        attach_output(
            "adapter %s exited %d without a result file on %s"
            % (adapter.tool, proc.returncode, inst.instance_id)
        )
        return record(Status.ERROR, elapsed)
    try:
        status, witness_rel = _parse_result_file(result_path)
    except HarnessError as exc:
        attach_output(str(exc))
        return record(Status.ERROR, elapsed)

    witness = ""
    if witness_rel:
        witness_path = Path(witness_rel)
        if not witness_path.is_absolute():
            witness_path = result_path.parent / witness_path
        witness = str(witness_path)
    if status is not Status.VIOLATED:
        witness = ""

    if status is Status.VIOLATED and witness and strict_witness:
        try:
            net, spec = _load_instance_problem(inst)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                ok = validate_witness(net, spec, read_witness(witness))
            detail = "; ".join(str(w.message) for w in caught)
        except (OSError, ValueError, ArithmeticError) as exc:
            ok, detail = False, str(exc)
        if not ok:
            attach_output(
                "witness validation failed for %s on %s: %s"
                % (adapter.tool, inst.instance_id, detail or "spec not satisfied")
            )
            return record(Status.ERROR, elapsed)
    elif status is Status.VIOLATED and witness:
        log.warning(
            "accepting unvalidated witness from %s on %s (lenient mode)",
            adapter.tool,
            inst.instance_id,
        )

    return record(status, elapsed, witness)


def prepare_adapter(adapter: ToolAdapter) -> None:
    """Run the adapter's one-time prepare command, if any."""
    if not adapter.prepare.strip():
        return
    proc = subprocess.run(
        shlex.split(adapter.prepare),
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
    )
    if proc.returncode != 0:
        raise HarnessError(
            "prepare failed for %s (exit %d)" % (adapter.tool, proc.returncode)
        )


# ---------------------------------------------------------------------------
# built-in baseline

def run_baseline(
    inst: Instance,
    budget: Budget = EASY_VIOLATED_BUDGET,
    *,
    tool: str = DEFAULT_BASELINE_TOOL,
    mode: str = "default",
    witness_dir=None,
) -> RunRecord:
    """Run the bundled participant: quick falsification, then verification.

    The falsifier gets the pinned easy-violated budget; whatever instance
    time remains goes to branch-and-bound verification.  Networks with
    unsupported operators yield UNKNOWN, mirroring tools that skip a
    benchmark rather than erroring on it.
    """
    start = time.monotonic()

    def record(status, witness=""):
        return RunRecord(
            tool=tool,
            instance_id=inst.instance_id,
            benchmark=inst.benchmark,
            status=status,
            seconds=min(time.monotonic() - start, inst.timeout),
            mode=mode,
            witness_path=witness,
        )

    try:
        net, spec = _load_instance_problem(inst)
    except NetworkError as exc:
        if "unsupported" in str(exc):
            return record(Status.UNKNOWN)
        log.warning("baseline failed to load %s: %s", inst.instance_id, exc)
        return record(Status.ERROR)
    except (SpecError, OSError) as exc:
        log.warning("baseline failed to load %s: %s", inst.instance_id, exc)
        return record(Status.ERROR)

    def save(witness):
        if witness_dir is None:
            return ""
        path = Path(witness_dir) / ("%s.txt" % inst.instance_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        write_witness(witness, path)
        return str(path)

    try:
        falsify_budget = dataclasses.replace(
            budget, wall_seconds=min(budget.wall_seconds, inst.timeout)
        )
        witness = falsify(net, spec, falsify_budget)
        if witness is not None:
            return record(Status.VIOLATED, save(witness))
        remaining = inst.timeout - (time.monotonic() - start)
        if remaining <= 0:
            return record(Status.TIMEOUT)
        outcome = verify(
            net, spec, dataclasses.replace(budget, wall_seconds=remaining)
        )
    except (ValueError, ArithmeticError) as exc:
        log.warning("baseline failed on %s: %s", inst.instance_id, exc)
        return record(Status.ERROR)
    witness = ""
    if outcome.status is Status.VIOLATED and outcome.witness is not None:
        witness = save(outcome.witness)
    return record(outcome.status, witness)


# ---------------------------------------------------------------------------
# overhead runs

TRIVIAL_SPEC_TEXT = (
    "; warm-up property: satisfiable everywhere on the unit box\n"
    "(declare-const X_0 Real)\n"
    "(declare-const Y_0 Real)\n"
    "(assert (>= X_0 0.0))\n"
    "(assert (<= X_0 1.0))\n"
    "(assert (>= Y_0 0.0))\n"
)


def trivial_instances(n: int, work_dir, timeout: float = 60.0) -> list:
    """Generate n identity-network warm-up instances under work_dir."""
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)
    instances = []
    for i in range(n):
        net_path = work_dir / ("trivial-%d.onnx" % i)
        spec_path = work_dir / ("trivial-%d.vnnlib" % i)
        save_network(gen_trivial_network(1), net_path)
        spec_path.write_text(TRIVIAL_SPEC_TEXT, encoding="utf-8")
        instances.append(
            Instance(
                instance_id="trivial-%d" % i,
                benchmark="trivial",
                network_path=net_path,
                spec_path=spec_path,
                timeout=timeout,
            )
        )
    return instances


def measure_overhead_run(
    adapters: Sequence[ToolAdapter],
    n_trivial: int,
    records: Iterable[RunRecord] = (),
    *,
    timeout: float = 60.0,
    grace: float = DEFAULT_GRACE_SECONDS,
    work_dir=None,
) -> list:
    """Append trivial-instance runs for every adapter to the record set.

    The trivial rows give overhead measurement a startup-dominated floor.
    An adapter that times out even on trivial instances contributes no
    usable row, so its overhead falls back to the minimum over its real
    instances.
    """
    records = list(records)
    if n_trivial == 0:
        warnings.warn("n_trivial is 0; record set unchanged", stacklevel=2)
        return records
    if n_trivial < 0:
        raise HarnessError("n_trivial must be >= 0")
    if work_dir is None:
        work_dir = tempfile.mkdtemp(prefix="veribench-trivial-")
    for inst in trivial_instances(n_trivial, work_dir, timeout=timeout):
        for adapter in adapters:
            records.append(
                run_tool(
                    adapter,
                    inst,
                    result_dir=Path(work_dir) / "results" / adapter.tool,
                    grace=grace,
                    strict_witness=False,
                )
            )
    return records


# ---------------------------------------------------------------------------
# epsilon calibration

@dataclass(frozen=True)
class CalibrationRequest:
    """Robustness-radius search around one input point."""

    network: object
    center: np.ndarray
    eps_max: float
    eps_tol: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(-1).copy()
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if center.size != self.network.n_inputs:
            raise HarnessError(
                "center has %d values, network takes %d"
                % (center.size, self.network.n_inputs)
            )
        if not np.all(np.isfinite(center)):
            raise HarnessError("non-finite center")
        if not (self.eps_max > 0):
            raise HarnessError("eps_max must be > 0")
        if not (self.eps_tol > 0):
            raise HarnessError("eps_tol must be > 0")


def _bisection_steps(eps_max, eps_tol):
    # fixed count so the oracle-call bound holds by construction; the
    # tiny nudge keeps exact power-of-two ratios from rounding up
    return max(0, math.ceil(math.log2(eps_max / eps_tol) - 1e-12))


def _largest_failing_radius(attack, eps_max, eps_tol):
    # largest radius where the attack finds nothing
    if not attack(eps_max):
        return eps_max
    lo, hi = 0.0, eps_max
    for _ in range(_bisection_steps(eps_max, eps_tol)):
        mid = 0.5 * (lo + hi)
        if attack(mid):
            hi = mid
        else:
            lo = mid
    return lo


def _smallest_unproved_radius(certify, eps_max, eps_tol):
    # smallest radius where certification no longer goes through
    if certify(eps_max):
        return eps_max
    lo, hi = 0.0, eps_max
    for _ in range(_bisection_steps(eps_max, eps_tol)):
        mid = 0.5 * (lo + hi)
        if certify(mid):
            lo = mid
        else:
            hi = mid
    return hi


def calibrate_epsilon(req: CalibrationRequest, attack, certify) -> float:
    """Pick a perturbation radius between the attack and certification
    frontiers: one third of the way up from the smaller frontier.

    attack(eps) -> bool (counterexample found); certify(eps) -> bool
    (proved robust).  Each binary search narrows [0, eps_max] to eps_tol,
    costing at most ceil(log2(eps_max/eps_tol)) + 1 oracle calls.  Oracle
    exceptions propagate.
    """
    r_attack = _largest_failing_radius(attack, req.eps_max, req.eps_tol)
    r_certify = _smallest_unproved_radius(certify, req.eps_max, req.eps_tol)
    eps_lb = min(r_attack, r_certify)
    eps_ub = max(r_attack, r_certify)
    if eps_lb == eps_ub:
        return eps_lb
    return (eps_lb + 2.0 * eps_ub) / 3.0


def make_robustness_oracles(
    req: CalibrationRequest, budget: Optional[Budget] = None
) -> tuple:
    """Attack/certify oracles for label robustness around req.center.

    The property: some non-maximal output overtakes the center's argmax
    class inside the L-infinity ball.  The attack is the module's own
    falsifier; the certifier prunes every competing class with forward
    affine bounds.
    """
    net = req.network
    if net.n_outputs < 2:
        raise HarnessError("robustness calibration needs at least two outputs")
    if budget is None:
        budget = dataclasses.replace(EASY_VIOLATED_BUDGET, wall_seconds=5.0)
    top = int(np.argmax(forward(net, req.center)))
    rows = []
    for j in range(net.n_outputs):
        if j == top:
            continue
        a_y = np.zeros(net.n_outputs)
        a_y[top] = 1.0
        a_y[j] = -1.0
        rows.append(a_y)
    b_x = tuple(0.0 for _ in range(net.n_inputs))

    def spec_at(eps):
        lower = req.center - eps
        upper = req.center + eps
        disjuncts = tuple(
            Conjunct(
                input_lower=tuple(lower),
                input_upper=tuple(upper),
                constraints=(MixedConstraint(a_y=tuple(row), b_x=b_x, rhs=0.0),),
            )
            for row in rows
        )
        return NormalizedSpec(net.n_inputs, net.n_outputs, disjuncts)

    def attack(eps):
        if eps <= 0:
            return False
        return falsify(net, spec_at(eps), budget) is not None

    def certify(eps):
        if eps <= 0:
            return True
        box = Box(req.center - eps, req.center + eps)
        ab = affine_bounds(net, box)
        for row in rows:
            lb = constraint_lower_bound(ab, row, np.asarray(b_x), ab.output_box)
            if not lb > 0.0:
                return False
        return True

    return attack, certify


# ---------------------------------------------------------------------------
# report emission

def emit_report(ledger: ScoreLedger, out_dir) -> list:
    """Write the text report, overall/per-benchmark CSVs, and instance logs.

    Deterministic bytes for a fixed ledger; an empty ledger produces
    header-only files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    put("report.txt", render_report(ledger))
    put("overall.csv", overall_table_csv(ledger))
    for benchmark in ledger.benchmarks:
        safe = benchmark.replace(os.sep, "_")
        put("benchmark_%s.csv" % safe, benchmark_table_csv(ledger, benchmark))
        put("instances_%s.log" % safe, render_instance_log(ledger, benchmark))
    return written


# ---------------------------------------------------------------------------
# configuration

def parse_config(text: str) -> dict:
    """Line-oriented ``key = value`` config; '#' starts a comment line."""
    config = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise HarnessError("bad config line %d: %r" % (line_no, raw))
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise HarnessError("bad config line %d: empty key" % line_no)
        if key in config:
            raise HarnessError("duplicate config key %r (line %d)" % (key, line_no))
        config[key] = value.strip()
    return config


_ADAPTER_FIELDS = {"run", "prepare", "mode"}


def build_adapters(config: dict) -> list:
    """Collect adapter.<tool>.<field> keys into ToolAdapters, sorted by tool."""
    fields: dict = {}
    for key, value in config.items():
        if not key.startswith("adapter."):
            continue
        parts = key.split(".")
        if len(parts) != 3 or parts[2] not in _ADAPTER_FIELDS:
            raise HarnessError("bad adapter config key %r" % key)
        fields.setdefault(parts[1], {})[parts[2]] = value
    adapters = []
    for tool in sorted(fields):
        spec = fields[tool]
        if "run" not in spec:
            raise HarnessError("adapter %s has no run command" % tool)
        adapters.append(
            ToolAdapter(
                tool=tool,
                run_template=spec["run"],
                prepare=spec.get("prepare", ""),
                mode=spec.get("mode", "default"),
            )
        )
    return adapters


# ---------------------------------------------------------------------------
# batch driver

def run_batch(
    instances: Sequence[Instance],
    adapters: Sequence[ToolAdapter],
    out_dir,
    *,
    baseline: Optional[str] = DEFAULT_BASELINE_TOOL,
    baseline_budget: Budget = EASY_VIOLATED_BUDGET,
    n_trivial: int = 3,
    grace: float = DEFAULT_GRACE_SECONDS,
    strict_witness: bool = True,
) -> dict:
    """Run every adapter (plus the baseline) over the instances, write one
    results CSV per tool under out_dir, and return records grouped by tool.

    Strictly sequential; a crashing adapter contributes ERROR records but
    never aborts the batch.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_tool: dict = {}

    for adapter in adapters:
        prepare_adapter(adapter)
        rows = by_tool.setdefault(adapter.tool, [])
        for inst in instances:
            rows.append(
                run_tool(
                    adapter,
                    inst,
                    result_dir=out_dir / "results" / adapter.tool,
                    grace=grace,
                    strict_witness=strict_witness,
                )
            )

    if n_trivial > 0 and adapters:
        augmented = measure_overhead_run(
            adapters,
            n_trivial,
            records=(),
            grace=grace,
            work_dir=out_dir / "trivial",
        )
        for record in augmented:
            by_tool.setdefault(record.tool, []).append(record)

    if baseline:
        rows = by_tool.setdefault(baseline, [])
        baseline_instances = list(instances)
        if n_trivial > 0:
            baseline_instances += trivial_instances(
                n_trivial, out_dir / "trivial-baseline"
            )
        for inst in baseline_instances:
            rows.append(
                run_baseline(
                    inst,
                    baseline_budget,
                    tool=baseline,
                    witness_dir=out_dir / "witnesses" / baseline,
                )
            )

    for tool in sorted(by_tool):
        write_results_csv(out_dir / ("%s.csv" % tool), by_tool[tool])
    return by_tool
