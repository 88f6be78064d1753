import json

import pytest

from gcnlstm.cli import build_parser, main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("gen-data", "--seed", 3, "--out", d / "s.jsonl", "--n-scenes", 8, "--k", 4, "--d-v", 32) == 0
    (d / "cfg.json").write_text(json.dumps({"max_iters": 20, "d_v": 32, "d_h": 12, "d_a": 6, "d_s": 6, "batch_size": 4}))
    for kind, short in (("semantic", "sem"), ("spatial", "spa")):
        assert run("train", "--scenes", d / "s.jsonl", "--kind", kind, "--config", d / "cfg.json", "--out", d / f"{short}.json") == 0
    return d


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run("bogus")
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        run("gen-data", "--out", "x", "--frobnicate")
    assert exc.value.code == 2


def test_caption_defaults():
    args = build_parser().parse_args(["caption", "--scenes", "s", "--out", "o"])
    assert (args.beam, args.alpha, args.mode) == (3, 0.7, "fused")


def test_gen_data_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert run("gen-data", "--seed", 4, "--out", tmp_path / name, "--n-scenes", 5, "--d-v", 32) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_train_is_byte_identical(workdir, tmp_path):
    for name in ("a", "b"):
        args = ("train", "--scenes", workdir / "s.jsonl", "--kind", "spatial", "--config", workdir / "cfg.json")
        assert run(*args, "--seed", 2, "--max-iters", 3, "--out", tmp_path / name) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_gradcheck_exit_code(capsys):
    assert run("gradcheck", "--instances", 1) == 0
    assert "PASS" in capsys.readouterr().out
    assert run("gradcheck", "--instances", 1, "--tol", 0) == 1


def test_caption_evaluate_and_sweep(workdir, capsys):
    d = workdir
    common = ("--scenes", d / "s.jsonl", "--sem", d / "sem.json", "--spa", d / "spa.json")
    assert run("caption", *common, "--out", d / "caps.jsonl", "--attention", d / "att.jsonl") == 0
    recs = [json.loads(line) for line in (d / "caps.jsonl").read_text().splitlines()]
    assert len(recs) == 8 and recs[0]["alpha"] == 0.7 and recs[0]["mode"] == "fused"
    assert (d / "att.jsonl").read_text()
    capsys.readouterr()
    assert run("evaluate", "--scenes", d / "s.jsonl", "--captions", d / "caps.jsonl", "--out", d / "rep.json") == 0
    scores = json.loads(capsys.readouterr().out)
    assert set(scores) == {"bleu1", "bleu2", "bleu3", "bleu4"}
    assert json.loads((d / "rep.json").read_text())["bleu"] == scores
    assert run("alpha-sweep", *common, "--points", 3, "--beam", 1) == 0
    assert capsys.readouterr().out.splitlines()[0] == "alpha,bleu4"


def test_build_graphs_and_relation_classifier(workdir):
    d = workdir
    assert run("train-relation", "--scenes", d / "s.jsonl", "--out", d / "rel.json", "--steps", 20) == 0
    for kind, extra in (("spatial", ()), ("semantic", ("--classifier", d / "rel.json"))):
        out = d / f"{kind}.graphs.jsonl"
        assert run("build-graphs", "--scenes", d / "s.jsonl", "--kind", kind, *extra, "--out", out) == 0
        assert len(out.read_text().splitlines()) == 8
    assert run("caption", "--scenes", d / "s.jsonl", "--spa", d / "spa.json", "--mode", "spa",
               "--spa-graphs", d / "spatial.graphs.jsonl", "--out", d / "c2.jsonl") == 0  # fmt: skip


def test_errors_are_json_on_stderr(workdir, capsys):
    assert run("caption", "--scenes", workdir / "missing.jsonl", "--spa", workdir / "spa.json", "--mode", "spa", "--out", "x") == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "FileNotFoundError" and err["command"] == "caption"
    assert run("caption", "--scenes", workdir / "s.jsonl", "--spa", workdir / "spa.json", "--out", "x") == 1
    assert "needs checkpoints" in json.loads(capsys.readouterr().err)["message"]
