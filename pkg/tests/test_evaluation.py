import dataclasses
import itertools
import json
from fractions import Fraction

import pytest

from hdlrag.engine import Engine
from hdlrag.errors import CorpusError, EnvironmentGapError, TransportError
from hdlrag.evaluation import (
    BenchmarkProblem,
    EvalOutcome,
    PassAtKReport,
    ProblemResult,
    ToolchainConfig,
    check_function,
    check_syntax,
    load_suite,
    pass_at_k,
    render_report_table,
    run_benchmark,
)
from hdlrag.llmclient import GenerationConfig, MockProvider, RetryPolicy

from conftest import ADDER_TB, GOLDEN_ADDER, MUTANT_NO_ENDMODULE


def oracle_pass_at_k(n: int, c: int, k: int) -> Fraction:
    """Exhaustive subset enumeration: the literal definition of pass@k."""
    outcomes = [True] * c + [False] * (n - c)
    hits = sum(1 for combo in itertools.combinations(outcomes, k) if any(combo))
    total = sum(1 for _ in itertools.combinations(outcomes, k))
    return Fraction(hits, total)


class TestPassAtK:
    def test_worked_example(self):
        # 5 samples, 2 correct: 1 - C(3,2)/C(5,2) = 1 - 3/10.
        assert pass_at_k(5, 2, 2) == pytest.approx(0.7, abs=1e-12)

    def test_degenerate_values_exact(self):
        assert pass_at_k(10, 0, 1) == 0.0
        assert pass_at_k(10, 0, 10) == 0.0
        assert pass_at_k(10, 10, 1) == 1.0
        assert pass_at_k(1, 1, 1) == 1.0
        # k > n - c: some success is guaranteed in every draw.
        assert pass_at_k(10, 8, 5) == 1.0
        assert pass_at_k(3, 1, 3) == 1.0

    def test_simple_fraction(self):
        assert pass_at_k(10, 1, 1) == pytest.approx(0.1, abs=1e-12)
        assert pass_at_k(4, 2, 1) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize(
        "n, c, k",
        [(5, 2, 0), (5, 2, 6), (0, 0, 1), (5, -1, 2), (5, 6, 2)],
    )
    def test_validation(self, n, c, k):
        with pytest.raises(ValueError):
            pass_at_k(n, c, k)

    def test_matches_subset_enumeration_oracle(self):
        for n in range(1, 9):
            for c in range(n + 1):
                for k in range(1, n + 1):
                    expected = float(oracle_pass_at_k(n, c, k))
                    got = pass_at_k(n, c, k)
                    assert abs(got - expected) <= 1e-12, (n, c, k)

    def test_monotone_in_k(self):
        for n in range(1, 13):
            for c in range(n + 1):
                estimates = [pass_at_k(n, c, k) for k in range(1, n + 1)]
                assert estimates == sorted(estimates), (n, c)

    def test_monotone_in_c(self):
        for n in (5, 12):
            for k in (1, 3, n):
                estimates = [pass_at_k(n, c, k) for c in range(n + 1)]
                assert estimates == sorted(estimates), (n, k)


class TestEvalOutcome:
    def test_passed_implies_compiled(self):
        with pytest.raises(ValueError, match="implies compiled"):
            EvalOutcome(problem_id="p", sample_index=0, compiled=False, passed=True)

    def test_legal_combinations(self):
        for compiled, passed in [(False, False), (True, False), (True, True)]:
            EvalOutcome(problem_id="p", sample_index=0, compiled=compiled, passed=passed)


class TestToolchainConfig:
    def test_defaults_target_icarus(self):
        cfg = ToolchainConfig()
        assert cfg.compile_cmd.startswith("iverilog")
        assert cfg.sim_run_cmd.startswith("vvp")
        assert cfg.fail_marker == "MISMATCH"
        assert cfg.timeout_s == 60.0

    def test_from_file(self, tmp_path):
        path = tmp_path / "toolchain.json"
        path.write_text(json.dumps({"compile_cmd": "vcc {files} -o {out}", "timeout_s": 5}))
        cfg = ToolchainConfig.from_file(path)
        assert cfg.compile_cmd == "vcc {files} -o {out}"
        assert cfg.timeout_s == 5
        assert cfg.sim_run_cmd == "vvp {out}"  # untouched default


class TestSyntaxStage:
    def test_golden_compiles(self, fake_toolchain):
        ok, log = check_syntax(GOLDEN_ADDER, fake_toolchain)
        assert ok
        assert log == ""

    def test_missing_endmodule_fails_with_log(self, fake_toolchain):
        ok, log = check_syntax(MUTANT_NO_ENDMODULE, fake_toolchain)
        assert not ok
        assert "endmodule" in log

    def test_non_verilog_fails(self, fake_toolchain):
        ok, _ = check_syntax("this is prose, not hardware", fake_toolchain)
        assert not ok

    def test_missing_binary_is_environment_gap(self):
        cfg = ToolchainConfig(compile_cmd="hdlrag-no-such-compiler -o {out} {files}")
        with pytest.raises(EnvironmentGapError, match="hdlrag-no-such-compiler"):
            check_syntax(GOLDEN_ADDER, cfg)


class TestFunctionStage:
    def test_golden_passes(self, fake_toolchain):
        ok, log = check_function(GOLDEN_ADDER, ADDER_TB, fake_toolchain)
        assert ok
        assert "ALL TESTS PASSED" in log

    def test_fail_marker_detected(self, fake_toolchain):
        code = GOLDEN_ADDER + "// EMIT_MISMATCH\n"
        ok, log = check_function(code, ADDER_TB, fake_toolchain)
        assert not ok
        assert "MISMATCH" in log

    def test_nonzero_exit_fails(self, fake_toolchain):
        code = GOLDEN_ADDER + "// EXIT_NONZERO\n"
        ok, log = check_function(code, ADDER_TB, fake_toolchain)
        assert not ok
        assert "simulation aborted" in log

    def test_quiet_sim_passes_without_pass_marker(self, fake_toolchain):
        code = GOLDEN_ADDER + "// QUIET_SIM\n"
        ok, _ = check_function(code, ADDER_TB, fake_toolchain)
        assert ok

    def test_quiet_sim_fails_when_pass_marker_required(self, fake_toolchain):
        strict = dataclasses.replace(fake_toolchain, pass_marker="ALL TESTS PASSED")
        code = GOLDEN_ADDER + "// QUIET_SIM\n"
        ok, _ = check_function(code, ADDER_TB, strict)
        assert not ok
        ok, _ = check_function(GOLDEN_ADDER, ADDER_TB, strict)
        assert ok

    def test_timeout_is_failure_not_environment_error(self, fake_toolchain):
        code = GOLDEN_ADDER + "// HANG_SIM\n"
        ok, log = check_function(code, ADDER_TB, fake_toolchain, timeout_s=1.0)
        assert not ok
        assert "[timeout after 1.0s]" in log

    def test_testbench_compile_failure_fails_sample(self, fake_toolchain):
        ok, log = check_function(GOLDEN_ADDER, "module broken;", fake_toolchain)
        assert not ok
        assert "fakecc: error" in log

    def test_extra_files_reach_the_simulator(self, fake_toolchain):
        poison = [("ref.v", "module r; endmodule\n// EMIT_MISMATCH\n")]
        ok, log = check_function(GOLDEN_ADDER, ADDER_TB, fake_toolchain, extra_files=poison)
        assert not ok
        assert "MISMATCH" in log
        benign = [("ref.v", "module r; endmodule\n")]
        ok, _ = check_function(GOLDEN_ADDER, ADDER_TB, fake_toolchain, extra_files=benign)
        assert ok


def suite_line(pid, prompt, **extra) -> str:
    obj = {"id": pid, "prompt_text": prompt, "testbench": ADDER_TB}
    obj.update(extra)
    return json.dumps(obj)


class TestLoadSuite:
    def test_happy_path(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        path.write_text(
            suite_line("p1", "first")
            + "\n\n"
            + suite_line(
                "p2",
                "second",
                k_values=[1, 2],
                timeout_s=5,
                reference_artifacts={"ref.v": "module r; endmodule"},
            )
            + "\n"
        )
        problems = load_suite(path)
        assert [p.id for p in problems] == ["p1", "p2"]
        assert problems[0].k_values is None
        assert problems[0].timeout_s is None
        assert problems[1].k_values == (1, 2)
        assert problems[1].timeout_s == 5.0
        assert problems[1].reference_artifacts == (("ref.v", "module r; endmodule"),)

    def test_invalid_json_names_position(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        path.write_text(suite_line("p1", "first") + "\n{oops\n")
        with pytest.raises(CorpusError, match="suite problem 2: invalid JSON"):
            load_suite(path)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        path.write_text(json.dumps({"id": "p1", "prompt_text": "x"}) + "\n")
        with pytest.raises(CorpusError, match="problem 1.*'testbench'"):
            load_suite(path)

    def test_empty_field_rejected(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        path.write_text(suite_line("p1", "") + "\n")
        with pytest.raises(CorpusError, match="'prompt_text'"):
            load_suite(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        path.write_text(suite_line("dup", "a") + "\n" + suite_line("dup", "b") + "\n")
        with pytest.raises(CorpusError, match="duplicate problem id 'dup' at 1 and 2"):
            load_suite(path)


def report_fixture() -> PassAtKReport:
    return PassAtKReport(
        k_values=(1, 5),
        problems=[
            ProblemResult(problem_id="p1", n=10, c_syntax=8, c_func=5),
            ProblemResult(problem_id="p2", n=10, c_syntax=4, c_func=2),
        ],
        skipped=[("p3", "toolchain binary not found: iverilog")],
        fingerprint={"provider": "mock"},
    )


class TestReportMath:
    def test_aggregate_is_mean_over_problems(self):
        report = report_fixture()
        assert report.aggregate("syntax", 1) == pytest.approx(0.6, abs=1e-12)
        assert report.aggregate("functional", 1) == pytest.approx(0.35, abs=1e-12)
        # p1 has n - c < k so contributes exactly 1.0; p2 is 1 - C(6,5)/C(10,5).
        expected = (1.0 + (1 - Fraction(6, 252))) / 2
        assert report.aggregate("syntax", 5) == pytest.approx(float(expected), abs=1e-12)

    def test_aggregate_skips_small_problems(self):
        report = PassAtKReport(
            k_values=(1, 5),
            problems=[
                ProblemResult(problem_id="big", n=10, c_syntax=10, c_func=10),
                ProblemResult(problem_id="small", n=3, c_syntax=0, c_func=0),
            ],
        )
        # At k=5 only the big problem qualifies.
        assert report.aggregate("syntax", 5) == 1.0
        assert report.aggregate("syntax", 1) == 0.5

    def test_aggregate_none_when_no_problem_big_enough(self):
        report = PassAtKReport(
            k_values=(20,),
            problems=[ProblemResult(problem_id="p", n=10, c_syntax=5, c_func=5)],
        )
        assert report.aggregate("syntax", 20) is None

    def test_roundtrip_through_file(self, tmp_path):
        report = report_fixture()
        path = tmp_path / "report.json"
        report.save(path)
        loaded = PassAtKReport.from_file(path)
        assert loaded.k_values == report.k_values
        assert loaded.skipped == report.skipped
        assert loaded.fingerprint == report.fingerprint
        assert [dataclasses.astuple(p) for p in loaded.problems] == [
            dataclasses.astuple(p) for p in report.problems
        ]
        for kind in ("syntax", "functional"):
            for k in report.k_values:
                assert loaded.aggregate(kind, k) == report.aggregate(kind, k)

    def test_to_dict_precomputes_aggregates(self):
        data = report_fixture().to_dict()
        assert data["aggregates"]["syntax"]["1"] == pytest.approx(0.6)
        assert data["aggregates"]["functional"]["1"] == pytest.approx(0.35)
        assert data["skipped"] == [
            {"id": "p3", "reason": "toolchain binary not found: iverilog"}
        ]


def fenced(code: str) -> str:
    return f"```verilog\n{code}```\n"


def keyed_engine(documents, index, embedder, responses, retry=None):
    return Engine(
        documents=documents,
        index=index,
        embedder=embedder,
        completion=MockProvider(responses),
        retry=retry or RetryPolicy(attempts=1, base_delay=0.0),
    )


BENCH_SUITE = [
    BenchmarkProblem(id="alpha", prompt_text="PROBLEM-ALPHA four bit adder", testbench=ADDER_TB),
    BenchmarkProblem(id="beta", prompt_text="PROBLEM-BETA shift register", testbench=ADDER_TB),
    BenchmarkProblem(id="gamma", prompt_text="PROBLEM-GAMMA comparator", testbench=ADDER_TB),
]

BENCH_RESPONSES = {
    "PROBLEM-ALPHA": fenced(GOLDEN_ADDER),
    "PROBLEM-BETA": fenced(MUTANT_NO_ENDMODULE),
    "PROBLEM-GAMMA": fenced(GOLDEN_ADDER + "// EMIT_MISMATCH\n"),
}


class TestRunBenchmark:
    def test_empty_suite_rejected(self, engine, fake_toolchain):
        with pytest.raises(ValueError, match="suite is empty"):
            run_benchmark([], engine, GenerationConfig(), fake_toolchain)

    def test_mixed_suite_counts_and_aggregates(
        self, fixture_documents, fixture_index, embedder, fake_toolchain
    ):
        eng = keyed_engine(fixture_documents, fixture_index, embedder, BENCH_RESPONSES)
        report = run_benchmark(
            BENCH_SUITE,
            eng,
            GenerationConfig(samples_n=2),
            fake_toolchain,
            k_values=(1, 2),
        )
        assert [p.problem_id for p in report.problems] == ["alpha", "beta", "gamma"]
        by_id = {p.problem_id: p for p in report.problems}
        assert (by_id["alpha"].n, by_id["alpha"].c_syntax, by_id["alpha"].c_func) == (2, 2, 2)
        assert (by_id["beta"].n, by_id["beta"].c_syntax, by_id["beta"].c_func) == (2, 0, 0)
        assert (by_id["gamma"].n, by_id["gamma"].c_syntax, by_id["gamma"].c_func) == (2, 2, 0)
        assert report.skipped == []
        assert report.aggregate("syntax", 1) == pytest.approx(2 / 3, abs=1e-12)
        assert report.aggregate("functional", 1) == pytest.approx(1 / 3, abs=1e-12)
        assert report.aggregate("syntax", 2) == pytest.approx(2 / 3, abs=1e-12)

    def test_fingerprint_records_configuration(
        self, fixture_documents, fixture_index, embedder, fake_toolchain
    ):
        eng = keyed_engine(fixture_documents, fixture_index, embedder, BENCH_RESPONSES)
        report = run_benchmark(
            BENCH_SUITE[:1], eng, GenerationConfig(samples_n=1), fake_toolchain
        )
        fp = report.fingerprint
        assert fp["index_size"] == 50
        assert fp["embedder"] == "deterministic-384"
        assert fp["generation"] == {
            "temperature": 0.8,
            "top_p": 0.95,
            "max_new_tokens": 1500,
            "samples_n": 1,
        }

    def test_missing_toolchain_skips_every_problem(
        self, fixture_documents, fixture_index, embedder
    ):
        eng = keyed_engine(fixture_documents, fixture_index, embedder, BENCH_RESPONSES)
        broken = ToolchainConfig(compile_cmd="hdlrag-no-such-compiler -o {out} {files}")
        report = run_benchmark(BENCH_SUITE, eng, GenerationConfig(samples_n=1), broken)
        assert report.problems == []
        assert [pid for pid, _ in report.skipped] == ["alpha", "beta", "gamma"]
        assert all("toolchain binary not found" in reason for _, reason in report.skipped)

    def test_generation_failures_shrink_n(
        self, fixture_documents, fixture_index, embedder, fake_toolchain
    ):
        class SecondCallFails:
            name = "second-call-fails"

            def __init__(self):
                self.calls = 0

            def generate(self, system_text, user_text, cfg):
                self.calls += 1
                if self.calls == 2:
                    raise TransportError("blip")
                return fenced(GOLDEN_ADDER)

        eng = Engine(
            documents=fixture_documents,
            index=fixture_index,
            embedder=embedder,
            completion=SecondCallFails(),
            retry=RetryPolicy(attempts=1, base_delay=0.0),
        )
        report = run_benchmark(
            BENCH_SUITE[:1], eng, GenerationConfig(samples_n=3), fake_toolchain
        )
        result = report.problems[0]
        assert result.n == 2
        assert result.generation_failures == 1
        assert result.c_syntax == 2


class TestRenderTable:
    def test_columns_and_values(self):
        text = render_report_table(report_fixture())
        lines = text.splitlines()
        assert "pass@1" in lines[0] and "pass@5" in lines[0]
        syntax_row = next(l for l in lines if l.lstrip().startswith("syntax"))
        assert "60.0" in syntax_row
        functional_row = next(l for l in lines if l.lstrip().startswith("functional"))
        assert "35.0" in functional_row
        assert any("skipped p3: toolchain binary not found" in l for l in lines)

    def test_baseline_adds_delta_columns(self):
        report = report_fixture()
        baseline = PassAtKReport(
            k_values=(1, 5),
            problems=[ProblemResult(problem_id="p1", n=10, c_syntax=5, c_func=1)],
        )
        text = render_report_table(report, baseline)
        header = text.splitlines()[0]
        assert "base@1" in header and "delta@5" in header
        # functional@1: 0.35 vs baseline 0.10, delta +0.25 rendered as 25.0.
        functional_row = next(
            l for l in text.splitlines() if l.lstrip().startswith("functional")
        )
        assert "25.0" in functional_row

    def test_none_rendered_as_dash(self):
        report = PassAtKReport(
            k_values=(1, 20),
            problems=[ProblemResult(problem_id="p", n=10, c_syntax=10, c_func=10)],
        )
        text = render_report_table(report)
        syntax_row = next(l for l in text.splitlines() if l.lstrip().startswith("syntax"))
        assert "-" in syntax_row
