import io
import subprocess
import sys

from setint.cli import main


def run(*argv, stdin=None):
    out, err = io.StringIO(), io.StringIO()
    if stdin is not None:
        old = sys.stdin
        sys.stdin = io.StringIO(stdin)
    try:
        code = main(list(argv), out, err)
    finally:
        if stdin is not None:
            sys.stdin = old
    return code, out.getvalue(), err.getvalue()


def test_solve_prints_answers_then_verdict():
    code, out, _ = run("solve", "X in {1,2} & X neq 1")
    assert code == 0 and out.splitlines() == ["X = 2", "SAT"]
    code, out, _ = run("solve", "X in {}")
    assert code == 0 and out.strip() == "UNSAT"


def test_max_answers():
    code, out, _ = run("solve", "X in {1,2,3,4}", "--max-answers", "2")
    assert out.splitlines() == ["X = 1", "X = 2", "SAT"]


def test_concrete_models():
    code, out, _ = run("solve", "subset(A,int(3,5)) & size(A,2) & 4 nin A", "--concrete")
    assert code == 0 and out.splitlines() == ["A = {3,5}", "SAT"]


def test_usage_and_parse_errors_exit_2():
    assert run("solve", "X in int(1,")[0] == 2
    assert run("solve", "nosuch(X)")[0] == 2
    assert run("frobnicate", "X = 1")[0] == 2
    assert run("solve", "X = 1", "--timeout", "0")[0] == 2
    assert run("check", "X = 1")[0] == 2


def test_prelude_can_be_disabled():
    assert run("solve", "smin({2,1},M)")[0] == 0
    code, _, err = run("solve", "smin({2,1},M)", "--no-prelude")
    assert code == 2 and "smin" in err


def test_prove_mode():
    code, out, _ = run("prove", "X in int(1,3) & X nin {1,2,3}")
    assert code == 0 and out.strip() == "THEOREM"
    code, out, _ = run("prove", "X in int(1,3) & X nin {1,2}")
    assert code == 1 and out.splitlines() == ["COUNTEREXAMPLE", "X = 3"]


def test_resource_limit_exits_3():
    query = ("max_int({5,3,8,2,4,7,1,12,11,10,15,14,20,21,19},K,M) & "
             "snth({5,3,8,2,4,7,1,12,11,10,15,14},5,E)")
    code, out, _ = run("solve", query, "--timeout", "1", "--max-answers", "1000")
    assert code == 3 and out.strip() == "UNKNOWN (timeout)"


def test_check_mode_tsv(tmp_path):
    batch = tmp_path / "b.slog"
    batch.write_text("EXPECT sat one: X in {1}.\n"
                     "EXPECT unsat two: X in {}.\n"
                     "EXPECT theorem three: X in int(1,2) & X nin {1,2}.\n")
    code, out, _ = run("check", str(batch))
    rows = [line.split("\t") for line in out.splitlines()]
    assert code == 0
    assert [r[:3] for r in rows] == [["one", "sat", "sat"], ["two", "unsat", "unsat"],
                                    ["three", "theorem", "theorem"]]
    assert all(r[3].isdigit() for r in rows)


def test_check_mode_mismatch(tmp_path):
    batch = tmp_path / "b.slog"
    batch.write_text("EXPECT unsat wrong: X in {1}.\nEXPECT theorem cex: X in {1,2}.\n")
    code, out, _ = run("check", str(batch))
    assert code == 1
    assert [line.split("\t")[2] for line in out.splitlines()] == ["sat", "counterexample"]


def test_shipped_lemmas_with_load():
    code, out, _ = run("prove", "-", "--load", "elevator",
                       stdin="EXPECT theorem a: initLift(L) & n_liftInv1(L).\n")
    assert code == 0 and out.splitlines()[0] == "a: THEOREM"


def test_stats_and_trace_go_to_stderr():
    code, out, err = run("solve", "un({1},{2},C)", "--stats", "--trace-rules")
    assert code == 0 and out.splitlines() == ["C = {1,2}", "SAT"]
    assert "rule_applications" in err and "un" in err


def test_oracle_check():
    code, _, err = run("solve", "X in int(1,3) & X neq 2", "--oracle-check")
    assert code == 0 and "oracle: sat" in err and "DISAGREES" not in err


def test_output_is_deterministic():
    args = ("solve", "un(A,B,int(1,3)) & disj(A,B) & size(A,1)", "--max-answers", "10")
    assert run(*args)[1] == run(*args)[1]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "setint.cli", "solve", "X in {7}"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0 and proc.stdout.splitlines() == ["X = 7", "SAT"]
