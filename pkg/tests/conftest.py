"""Shared fixtures: a 50-record corpus, a ready engine, Verilog sources
for the evaluation stages, and a marker-driven fake toolchain that
exercises the harness without a real compiler installed.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import pytest

from hdlrag.corpus import ModuleRecord, PortDecl, build_document
from hdlrag.embedding import DeterministicProvider, embed_texts
from hdlrag.engine import Engine
from hdlrag.evaluation import ToolchainConfig
from hdlrag.index import build_index
from hdlrag.llmclient import MockProvider

_TOOLS = Path(__file__).parent / "tools"

# (stem, description, ports, comment) families the fixture corpus cycles
# through; descriptions share vocabulary within a family so retrieval has
# real structure to find.
_FAMILIES = [
    (
        "uart_tx",
        "UART serial transmitter with start and stop bits",
        [("clk", "input", "1"), ("data", "input", "[7:0]"), ("tx", "output", "1")],
        "8N1 framing, no parity",
    ),
    (
        "uart_rx",
        "UART serial receiver with oversampling",
        [("clk", "input", "1"), ("rx", "input", "1"), ("data", "output", "[7:0]")],
        "16x oversampling",
    ),
    (
        "spi_master",
        "SPI master supporting mode 0 transfers",
        [("clk", "input", "1"), ("mosi", "output", "1"), ("miso", "input", "1")],
        "",
    ),
    (
        "sync_fifo",
        "synchronous FIFO queue with full and empty flags",
        [("clk", "input", "1"), ("din", "input", "[15:0]"), ("full", "output", "1")],
        "depth 16, first word fall through",
    ),
    (
        "counter",
        "binary up counter with synchronous reset",
        [("clk", "input", "1"), ("rst", "input", "1"), ("count", "output", "[7:0]")],
        "",
    ),
    (
        "shift_reg",
        "serial in parallel out shift register",
        [("clk", "input", "1"), ("sin", "input", "1"), ("q", "output", "[7:0]")],
        "shifts on rising edge",
    ),
    (
        "pwm_gen",
        "pulse width modulation generator with duty register",
        [("clk", "input", "1"), ("duty", "input", "[7:0]"), ("pwm", "output", "1")],
        "",
    ),
    (
        "rca_adder",
        "ripple carry adder for unsigned operands",
        [("a", "input", "[3:0]"), ("b", "input", "[3:0]"), ("sum", "output", "[4:0]")],
        "carry chain is explicit",
    ),
    (
        "mux4",
        "four to one multiplexer with select lines",
        [("sel", "input", "[1:0]"), ("din", "input", "[3:0]"), ("dout", "output", "1")],
        "",
    ),
    (
        "gray_dec",
        "gray code to binary decoder",
        [("gray", "input", "[3:0]"), ("bin", "output", "[3:0]")],
        "combinational only",
    ),
]


def make_records(n: int = 50) -> list[ModuleRecord]:
    """Deterministic fixture corpus of n varied records."""
    records = []
    for i in range(n):
        stem, desc, ports, comment = _FAMILIES[i % len(_FAMILIES)]
        name = f"{stem}_v{i}"
        port_decls = tuple(PortDecl(name=p, direction=d, width=w) for p, d, w in ports)
        comments: tuple[str, ...] = (comment,) if comment else ()
        description = f"{desc} variant {i}"
        # A few deliberately sparse/odd shapes to exercise header elision.
        if i == 7:
            port_decls = ()
        if i == 11:
            description = ""
        if i == 13:
            comments = ("first line\nsecond line",)
        if i == 17:
            port_decls = port_decls + (PortDecl(name="pad", direction="inout", width="1"),)
        arglist = ", ".join(f"{p.direction} {'' if p.width == '1' else p.width + ' '}{p.name}"
                            for p in port_decls)
        records.append(
            ModuleRecord(
                id=f"{stem}-{i:03d}",
                name=name,
                description=description,
                ports=port_decls,
                comments=comments,
                code=f"module {name}({arglist});\n  // body {i}\nendmodule\n",
            )
        )
    return records


def records_to_jsonl(records: list[ModuleRecord], path: Path) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "id": rec.id,
                        "name": rec.name,
                        "description": rec.description,
                        "ports": [
                            {"name": p.name, "direction": p.direction, "width": p.width}
                            for p in rec.ports
                        ],
                        "comments": list(rec.comments),
                        "code": rec.code,
                    }
                )
                + "\n"
            )
    return path


@pytest.fixture(scope="session")
def fixture_records() -> list[ModuleRecord]:
    return make_records(50)


@pytest.fixture()
def corpus_file(fixture_records, tmp_path) -> Path:
    return records_to_jsonl(fixture_records, tmp_path / "corpus.jsonl")


@pytest.fixture(scope="session")
def fixture_documents(fixture_records):
    return [build_document(rec) for rec in fixture_records]


@pytest.fixture(scope="session")
def embedder():
    return DeterministicProvider(dim=384)


@pytest.fixture(scope="session")
def fixture_index(fixture_documents, embedder):
    vectors = embed_texts(embedder, [doc.text for doc in fixture_documents])
    return build_index([(doc.id, vec) for doc, vec in zip(fixture_documents, vectors)])


@pytest.fixture()
def engine(fixture_documents, fixture_index, embedder):
    return Engine(
        documents=fixture_documents,
        index=fixture_index,
        embedder=embedder,
        completion=MockProvider(),
    )


@pytest.fixture(scope="session")
def fake_toolchain() -> ToolchainConfig:
    return ToolchainConfig(
        compile_cmd=f"{sys.executable} {_TOOLS / 'fakecc.py'} -o {{out}} {{files}}",
        sim_compile_cmd=f"{sys.executable} {_TOOLS / 'fakecc.py'} -o {{out}} {{files}}",
        sim_run_cmd=f"{sys.executable} {_TOOLS / 'fakesim.py'} {{out}}",
        pass_marker="",
        fail_marker="MISMATCH",
        timeout_s=10.0,
    )


def have_real_toolchain() -> bool:
    return shutil.which("iverilog") is not None and shutil.which("vvp") is not None


GOLDEN_ADDER = """\
module adder4(input [3:0] a, input [3:0] b, output [4:0] sum);
  wire [3:0] s;
  wire c;
  assign {c, s} = a + b;
  assign sum = {c, s};
endmodule
"""

# Missing endmodule: must fail the syntax stage.
MUTANT_NO_ENDMODULE = GOLDEN_ADDER.replace("endmodule\n", "")

# Swapped concatenation operands: compiles, wrong result for most inputs.
MUTANT_SWAPPED = GOLDEN_ADDER.replace("assign sum = {c, s};", "assign sum = {s, c};")

ADDER_TB = """\
module tb;
  reg [3:0] a, b;
  wire [4:0] sum;
  integer i, j, errors;
  adder4 dut(.a(a), .b(b), .sum(sum));
  initial begin
    errors = 0;
    for (i = 0; i < 16; i = i + 1)
      for (j = 0; j < 16; j = j + 1) begin
        a = i[3:0]; b = j[3:0];
        #1;
        if (sum !== i + j) begin
          $display("MISMATCH a=%0d b=%0d sum=%0d", i, j, sum);
          errors = errors + 1;
        end
      end
    if (errors == 0) $display("ALL TESTS PASSED");
    $finish;
  end
endmodule
"""

# Never calls $finish and never settles: must trip the timeout path.
HANG_TB = """\
module tb;
  reg clk;
  initial clk = 0;
  always #1 clk = ~clk;
endmodule
"""


@pytest.fixture(scope="session")
def verilog_fixtures() -> dict:
    return {
        "golden": GOLDEN_ADDER,
        "no_endmodule": MUTANT_NO_ENDMODULE,
        "swapped": MUTANT_SWAPPED,
        "tb": ADDER_TB,
        "hang_tb": HANG_TB,
    }
