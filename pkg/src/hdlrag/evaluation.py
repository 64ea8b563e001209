"""Two-stage validation and pass@k aggregation.

Each generated sample is first compiled (syntax stage) and, only if that
succeeds, simulated against the problem's testbench (functional stage).
Per-problem counts feed the unbiased pass@k estimator; aggregates are
the mean over problems. Toolchain commands are templated strings with
{files} and {out} placeholders so any compiler/simulator pair fits.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import CorpusError, EnvironmentGapError

DEFAULT_K_VALUES = (1, 5, 10)
DEFAULT_SIM_TIMEOUT_S = 60.0


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimate of the probability that at least one of k draws
    (without replacement, from n samples of which c passed) passes.

    pass@k = 1 - C(n-c, k) / C(n, k), computed as a running product so no
    large factorials appear. When k > n - c the failure term is zero.
    """
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k} n={n}")
    if c < 0 or c > n:
        raise ValueError(f"need 0 <= c <= n, got c={c} n={n}")
    if n - c < k:
        return 1.0
    prob_all_fail = 1.0
    for i in range(k):
        prob_all_fail *= (n - c - i) / (n - i)
    return 1.0 - prob_all_fail


@dataclass(frozen=True)
class BenchmarkProblem:
    """One suite entry: a natural-language request and its testbench."""

    id: str
    prompt_text: str
    testbench: str
    k_values: tuple[int, ...] | None = None
    timeout_s: float | None = None
    reference_artifacts: tuple[tuple[str, str], ...] = ()  # (filename, content)


@dataclass(frozen=True)
class EvalOutcome:
    """Stage labels for one generated sample."""

    problem_id: str
    sample_index: int
    compiled: bool
    passed: bool
    compiler_log: str = ""
    sim_log: str = ""

    def __post_init__(self):
        if self.passed and not self.compiled:
            raise ValueError("passed implies compiled")


@dataclass(frozen=True)
class ToolchainConfig:
    """External compile/simulate commands.

    Commands are shell-free templates: {files} expands to the input file
    paths, {out} to the build product. pass_marker / fail_marker describe
    how the suite's testbenches signal verdicts on stdout; empty markers
    disable that check and leave the exit status as the only signal.
    """

    compile_cmd: str = "iverilog -g2005 -o {out} {files}"
    sim_compile_cmd: str = "iverilog -g2005 -o {out} {files}"
    sim_run_cmd: str = "vvp {out}"
    pass_marker: str = ""
    fail_marker: str = "MISMATCH"
    timeout_s: float = DEFAULT_SIM_TIMEOUT_S

    @classmethod
    def from_file(cls, path: str | Path) -> "ToolchainConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)


def _run_cmd(
    template: str, files: Sequence[Path], out: Path, timeout_s: float
) -> tuple[int | None, str]:
    """Run a templated command; returns (returncode, combined log).

    returncode None means the command timed out. A missing executable is
    an environment gap, not a verdict.
    """
    cmd = shlex.split(template.format(files=" ".join(str(f) for f in files), out=str(out)))
    try:
        proc = subprocess.run(
            cmd,
            capture_output=True,
            text=True,
            timeout=timeout_s,
            cwd=str(out.parent),
        )
    except FileNotFoundError as exc:
        raise EnvironmentGapError(f"toolchain binary not found: {cmd[0]}") from exc
    except subprocess.TimeoutExpired as exc:
        log = (exc.stdout or "") + (exc.stderr or "")
        if isinstance(log, bytes):
            log = log.decode("utf-8", "replace")
        return None, log + f"\n[timeout after {timeout_s}s]"
    return proc.returncode, proc.stdout + proc.stderr


def check_syntax(code: str, toolchain: ToolchainConfig) -> tuple[bool, str]:
    """Stage 1: compile the code alone; compiled iff exit status 0."""
    with tempfile.TemporaryDirectory(prefix="hdlrag-syn-") as tmp:
        tmpdir = Path(tmp)
        design = tmpdir / "design.v"
        design.write_text(code, encoding="utf-8")
        rc, log = _run_cmd(
            toolchain.compile_cmd, [design], tmpdir / "design.out", toolchain.timeout_s
        )
        return rc == 0, log


def check_function(
    code: str,
    testbench: str,
    toolchain: ToolchainConfig,
    timeout_s: float | None = None,
    extra_files: Sequence[tuple[str, str]] = (),
) -> tuple[bool, str]:
    """Stage 2: compile code with the testbench and simulate.

    passed requires: simulator exit 0, no fail_marker in the output, and
    the pass_marker present when one is configured. A simulation timeout
    is a failure flagged in the log, not an environment error.
    """
    timeout = timeout_s if timeout_s is not None else toolchain.timeout_s
    with tempfile.TemporaryDirectory(prefix="hdlrag-sim-") as tmp:
        tmpdir = Path(tmp)
        design = tmpdir / "design.v"
        design.write_text(code, encoding="utf-8")
        tb = tmpdir / "tb.v"
        tb.write_text(testbench, encoding="utf-8")
        files = [design, tb]
        for fname, content in extra_files:
            extra = tmpdir / fname
            extra.write_text(content, encoding="utf-8")
            files.append(extra)
        out = tmpdir / "sim.out"
        rc, compile_log = _run_cmd(toolchain.sim_compile_cmd, files, out, timeout)
        if rc != 0:
            return False, compile_log
        rc, run_log = _run_cmd(toolchain.sim_run_cmd, [out], out, timeout)
        log = compile_log + run_log
        if rc is None:  # timed out
            return False, log
        passed = rc == 0
        if toolchain.fail_marker and toolchain.fail_marker in run_log:
            passed = False
        if toolchain.pass_marker and toolchain.pass_marker not in run_log:
            passed = False
        return passed, log


def load_suite(path: str | Path) -> list[BenchmarkProblem]:
    """Load a newline-delimited benchmark suite.

    Each line: {id, prompt_text, testbench, k_values?, timeout_s?}.
    """
    problems: list[BenchmarkProblem] = []
    seen: dict[str, int] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        position = 0
        for line in fh:
            if not line.strip():
                continue
            position += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"suite problem {position}: invalid JSON: {exc}") from exc
            for key in ("id", "prompt_text", "testbench"):
                if not isinstance(obj.get(key), str) or not obj[key]:
                    raise CorpusError(
                        f"suite problem {position}: field {key!r} must be a non-empty string"
                    )
            if obj["id"] in seen:
                raise CorpusError(
                    f"duplicate problem id {obj['id']!r} at {seen[obj['id']]} and {position}"
                )
            seen[obj["id"]] = position
            problems.append(
                BenchmarkProblem(
                    id=obj["id"],
                    prompt_text=obj["prompt_text"],
                    testbench=obj["testbench"],
                    k_values=tuple(obj["k_values"]) if "k_values" in obj else None,
                    timeout_s=float(obj["timeout_s"]) if "timeout_s" in obj else None,
                    reference_artifacts=tuple(
                        (str(k), str(v)) for k, v in obj.get("reference_artifacts", {}).items()
                    ),
                )
            )
    return problems


@dataclass(frozen=True)
class ProblemResult:
    """Per-problem counts plus everything needed to re-aggregate."""

    problem_id: str
    n: int
    c_syntax: int
    c_func: int
    generation_failures: int = 0
    outcomes: tuple[EvalOutcome, ...] = ()


@dataclass
class PassAtKReport:
    """Aggregated benchmark result with its configuration fingerprint."""

    k_values: tuple[int, ...]
    problems: list[ProblemResult]
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (problem_id, reason)
    fingerprint: dict = field(default_factory=dict)

    def aggregate(self, kind: str, k: int) -> float | None:
        """Mean per-problem pass@k; kind is "syntax" or "functional".

        None when no problem produced at least k samples.
        """
        values = []
        for p in self.problems:
            if p.n >= k >= 1:
                c = p.c_syntax if kind == "syntax" else p.c_func
                values.append(pass_at_k(p.n, c, k))
        return sum(values) / len(values) if values else None

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "fingerprint": self.fingerprint,
            "problems": [
                {
                    "id": p.problem_id,
                    "n": p.n,
                    "c_syntax": p.c_syntax,
                    "c_func": p.c_func,
                    "generation_failures": p.generation_failures,
                }
                for p in self.problems
            ],
            "skipped": [{"id": pid, "reason": reason} for pid, reason in self.skipped],
            "aggregates": {
                kind: {str(k): self.aggregate(kind, k) for k in self.k_values}
                for kind in ("syntax", "functional")
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_file(cls, path: str | Path) -> "PassAtKReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        report = cls(
            k_values=tuple(data["k_values"]),
            problems=[
                ProblemResult(
                    problem_id=p["id"],
                    n=p["n"],
                    c_syntax=p["c_syntax"],
                    c_func=p["c_func"],
                    generation_failures=p.get("generation_failures", 0),
                )
                for p in data["problems"]
            ],
            fingerprint=data.get("fingerprint", {}),
        )
        report.skipped = [(s["id"], s["reason"]) for s in data.get("skipped", [])]
        return report


def run_benchmark(
    problems: Sequence[BenchmarkProblem],
    engine,
    gen_cfg,
    toolchain: ToolchainConfig,
    k_values: tuple[int, ...] = DEFAULT_K_VALUES,
) -> PassAtKReport:
    """Evaluate a suite end to end.

    For each problem: retrieve + assemble + sample the provider n times,
    extract, then run the two validation stages per sample. A problem is
    skipped (not scored) only on an environment error such as a missing
    toolchain binary; per-sample generation failures just shrink that
    problem's n.
    """
    if not problems:
        raise ValueError("suite is empty")
    report = PassAtKReport(
        k_values=tuple(k_values), problems=[], fingerprint=engine.describe()
    )
    report.fingerprint["generation"] = {
        "temperature": gen_cfg.temperature,
        "top_p": gen_cfg.top_p,
        "max_new_tokens": gen_cfg.max_new_tokens,
        "samples_n": gen_cfg.samples_n,
    }
    for problem in problems:
        try:
            result = _evaluate_problem(problem, engine, gen_cfg, toolchain)
        except EnvironmentGapError as exc:
            report.skipped.append((problem.id, str(exc)))
            continue
        report.problems.append(result)
    return report


def _evaluate_problem(
    problem: BenchmarkProblem, engine, gen_cfg, toolchain: ToolchainConfig
) -> ProblemResult:
    samples = engine.generate_samples(problem.prompt_text, gen_cfg)
    outcomes: list[EvalOutcome] = []
    failures = 0
    for sample in samples:
        if not sample.ok:
            failures += 1
            continue
        compiled, compile_log = check_syntax(sample.text, toolchain)
        passed, sim_log = False, ""
        if compiled:
            passed, sim_log = check_function(
                sample.text,
                problem.testbench,
                toolchain,
                timeout_s=problem.timeout_s,
                extra_files=problem.reference_artifacts,
            )
        outcomes.append(
            EvalOutcome(
                problem_id=problem.id,
                sample_index=sample.index,
                compiled=compiled,
                passed=passed,
                compiler_log=compile_log,
                sim_log=sim_log,
            )
        )
    return ProblemResult(
        problem_id=problem.id,
        n=len(outcomes),
        c_syntax=sum(1 for o in outcomes if o.compiled),
        c_func=sum(1 for o in outcomes if o.passed),
        generation_failures=failures,
        outcomes=tuple(outcomes),
    )


def _fmt(value: float | None) -> str:
    return "  -  " if value is None else f"{100 * value:5.1f}"


def render_report_table(report: PassAtKReport, baseline: PassAtKReport | None = None) -> str:
    """Human-readable table: syntax and functional pass@k columns.

    With a baseline report, adds baseline and improvement columns in the
    usual benchmark-table layout.
    """
    ks = report.k_values
    lines = []
    header = ["kind"]
    if baseline is not None:
        header += [f"base@{k}" for k in ks]
    header += [f"pass@{k}" for k in ks]
    if baseline is not None:
        header += [f"delta@{k}" for k in ks]
    lines.append(" | ".join(f"{h:>8}" for h in header))
    lines.append("-+-".join("-" * 8 for _ in header))
    for kind in ("syntax", "functional"):
        row = [f"{kind:>8}"]
        if baseline is not None:
            row += [f"{_fmt(baseline.aggregate(kind, k)):>8}" for k in ks]
        row += [f"{_fmt(report.aggregate(kind, k)):>8}" for k in ks]
        if baseline is not None:
            for k in ks:
                a, b = report.aggregate(kind, k), baseline.aggregate(kind, k)
                delta = None if a is None or b is None else a - b
                row.append(f"{_fmt(delta):>8}")
        lines.append(" | ".join(row))
    if report.skipped:
        lines.append("")
        for pid, reason in report.skipped:
            lines.append(f"skipped {pid}: {reason}")
    return "\n".join(lines)
