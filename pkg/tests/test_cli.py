import csv
import hashlib
import json
import shutil

import httpx
import pytest

from scrumlens import cli, forge, store
from scrumlens.errors import AuthError


@pytest.fixture
def team_a(course_dir, tmp_path):
    """The course fixture cut down to team A (3 developers x 2 sprints)."""
    out = tmp_path / "team_a"
    ds = store.load_archive(course_dir, windows=course_dir / "windows.json")
    ids = {d.id for d in ds.members("A")}
    sub = store.ProjectDataset(
        developers=tuple(d for d in ds.developers if d.id in ids),
        sprint_windows=tuple(w for w in ds.sprint_windows if w.team_id == "A"),
        commits=tuple(c for c in ds.commits if c.author_id in ids),
        issues=tuple(i for i in ds.issues if i.assignees <= ids),
        pr_comments=tuple(p for p in ds.pr_comments if p.author_id in ids),
    )
    store.write_archive(sub, out)
    store.write_windows(tmp_path / "windows_a.json", sub.sprint_windows)
    return out


def _digest(root):
    return {p.as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def test_measure_fixture(team_a, tmp_path, capsys):
    code = cli.main(["measure", "--archives", str(team_a), "--windows", str(tmp_path / "windows_a.json"),
                     "--out", str(tmp_path / "m")])
    assert code == 0
    with open(tmp_path / "m" / "measurements.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 36
    assert "36 records" in capsys.readouterr().out


def test_measure_is_idempotent_and_read_only(team_a, tmp_path):
    before = _digest(team_a)
    args = ["measure", "--archives", str(team_a), "--out", str(tmp_path / "m")]
    assert cli.main(args) == 0
    first = (tmp_path / "m" / "measurements.csv").read_bytes()
    assert cli.main(args) == 0
    assert (tmp_path / "m" / "measurements.csv").read_bytes() == first
    assert _digest(team_a) == before


def test_measure_exclude_merges_flag(team_a, tmp_path):
    cli.main(["measure", "--archives", str(team_a), "--out", str(tmp_path / "a")])
    cli.main(["measure", "--archives", str(team_a), "--exclude-merges", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "measurements.csv").read_text() != (tmp_path / "b" / "measurements.csv").read_text()


def test_missing_archive_is_usage_error(tmp_path, capsys):
    assert cli.main(["measure", "--archives", str(tmp_path / "nope"), "--out", str(tmp_path)]) == 2
    assert "usage error" in capsys.readouterr().err


def test_missing_required_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["measure"])
    assert exc.value.code == 2


def test_referential_error_is_data_error(team_a, tmp_path, capsys):
    broken = tmp_path / "broken"
    shutil.copytree(team_a, broken)
    with open(broken / "commits.jsonl", "a") as fh:
        fh.write(json.dumps({"sha": "zz", "author_id": "ghost", "timestamp": "2024-01-05T00:00:00Z",
                             "message": "", "changes": []}) + "\n")
    assert cli.main(["measure", "--archives", str(broken), "--out", str(tmp_path / "m")]) == 3
    assert "ghost" in capsys.readouterr().err


def test_unknown_window_is_data_error(team_a, tmp_path):
    (tmp_path / "w.json").write_text("[]")
    code = cli.main(["measure", "--archives", str(team_a), "--windows", str(tmp_path / "w.json"),
                     "--out", str(tmp_path / "m")])
    assert code == 3


def test_analyze_empty_survey(tmp_path, capsys):
    (tmp_path / "survey.csv").write_text("team,developer,role,sprint,q1,q2,q3,q4,q5,q6,q7,q8,q9\n")
    assert cli.main(["analyze", "--survey", str(tmp_path / "survey.csv"), "--out", str(tmp_path / "r")]) == 3
    assert "data error" in capsys.readouterr().err


def test_analyze_invalid_rating(tmp_path):
    (tmp_path / "survey.csv").write_text(
        "team,developer,role,sprint,q1,q2,q3,q4,q5,q6,q7,q8,q9\n1,d,Developer,1,9,1,1,1,1,1,1,1,1\n"
    )
    assert cli.main(["analyze", "--survey", str(tmp_path / "survey.csv"), "--out", str(tmp_path / "r")]) == 3


@pytest.fixture
def synth_out(tmp_path):
    assert cli.main(["synth", "--seed", "8", "--out", str(tmp_path / "s")]) == 0
    return tmp_path / "s"


def test_analyze_from_archives_with_options(synth_out, tmp_path, capsys):
    (tmp_path / "plan.json").write_text('[["Q1", "RTA"], ["Q9", "PRC"]]')
    code = cli.main([
        "analyze", "--survey", str(synth_out / "survey.csv"),
        "--archives", str(synth_out / "archive"), "--windows", str(synth_out / "windows.json"),
        "--exclude-pos", "--pooling", "per-team", "--plan", str(tmp_path / "plan.json"),
        "--out", str(tmp_path / "r"),
    ])
    assert code == 0
    capsys.readouterr()
    meta = json.loads((tmp_path / "r" / "metadata.json").read_text())
    assert meta["config"]["exclude_pos"] is True
    assert meta["config"]["pooling"] == "per-team"
    with open(tmp_path / "r" / "table8_survey_measurement.csv", newline="") as fh:
        assert [r[0] for r in csv.reader(fh)][1:] == ["Q1 - RTA", "Q9 - PRC"]
    with open(tmp_path / "r" / "table3_friedman.csv", newline="") as fh:
        assert len(list(csv.reader(fh))) == 1 + 6 * 9


def test_analyze_does_not_touch_inputs(synth_out, tmp_path, capsys):
    before = _digest(synth_out)
    assert cli.main(["analyze", "--survey", str(synth_out / "survey.csv"), "--out", str(tmp_path / "r")]) == 0
    assert _digest(synth_out) == before
    capsys.readouterr()


def test_synth_with_config(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"teams": 2, "devs_per_team": 4, "sprints": 2}))
    assert cli.main(["synth", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "s")]) == 0
    assert len(store.load_windows(tmp_path / "s" / "windows.json")) == 4
    capsys.readouterr()


def test_report_renders_markdown(synth_out, tmp_path, capsys):
    cli.main(["analyze", "--survey", str(synth_out / "survey.csv"), "--out", str(tmp_path / "r")])
    (tmp_path / "r" / "report.md").unlink()
    capsys.readouterr()
    assert cli.main(["report", str(tmp_path / "r")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# ")
    assert (tmp_path / "r" / "report.md").exists()


def test_report_missing_dir(tmp_path):
    assert cli.main(["report", str(tmp_path / "none")]) == 2


def _fake_fetch(monkeypatch, handler):
    real = forge.fetch_forge

    def fetch(repo, out, *, token=None, since=None):
        client = forge.ForgeClient(token, base_url="https://api.example", transport=httpx.MockTransport(handler))
        return real(repo, out, since=since, client=client)

    monkeypatch.setattr(forge, "fetch_forge", fetch)


def test_ingest_auth_failure(monkeypatch, tmp_path, capsys):
    _fake_fetch(monkeypatch, lambda request: httpx.Response(401, json={"message": "Bad credentials"}))
    assert cli.main(["ingest", "--repo", "acme/shop", "--out", str(tmp_path)]) == 4
    assert "forge error" in capsys.readouterr().err


def test_ingest_writes_archive(monkeypatch, tmp_path, capsys):
    def handler(request):
        path = request.url.path
        if path.endswith("/commits"):
            return httpx.Response(200, json=[{
                "sha": "abc", "author": {"login": "t1-d01"}, "parents": [],
                "commit": {"author": {"date": "2018-10-23T10:00:00Z"}, "message": "Fixes #1"},
            }])
        if "/commits/" in path:
            return httpx.Response(200, json={"files": [{"filename": "app/a.rb", "additions": 2, "deletions": 0}]})
        return httpx.Response(200, json=[])

    monkeypatch.setenv(forge.TOKEN_ENV, "t")
    _fake_fetch(monkeypatch, handler)
    assert cli.main(["ingest", "--repo", "acme/shop", "--out", str(tmp_path / "arch")]) == 0
    capsys.readouterr()
    lines = (tmp_path / "arch" / "commits.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["author_id"] == "t1-d01"


def test_ingest_error_class_mapping(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise AuthError("nope")

    monkeypatch.setattr(forge, "fetch_forge", boom)
    assert cli.main(["ingest", "--repo", "a/b", "--out", str(tmp_path)]) == 4
