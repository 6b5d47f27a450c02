from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scrumlens import measurements as ms
from scrumlens import store
from scrumlens.errors import WindowLookupError
from scrumlens.measurements import MeasureId
from scrumlens.store import Commit, FileChange, PRCommentRecord, SprintWindow

UTC = timezone.utc
START = datetime(2024, 1, 1, 9, tzinfo=UTC)
REVIEW = datetime(2024, 1, 14, 14, tzinfo=UTC)
WINDOW = SprintWindow("T", 1, START, REVIEW)


def commit(*changes, t=None, msg="", sha=None, merge=False):
    t = t or START + timedelta(days=1)
    sha = sha or f"{hash((changes, t, msg)) & 0xFFFFFFFF:08x}"
    return Commit(sha, "d1", t, msg, tuple(FileChange(p, a, d) for p, a, d in changes), merge)


# ---------------------------------------------------------------- RTA


def test_rta_ratio():
    c = commit(("spec/a_spec.rb", 20, 10), ("app/a.rb", 40, 20))
    assert ms.rta([c]) == 0.5


def test_rta_missing_without_commits():
    assert ms.rta([]) is None


def test_rta_zero_tests():
    assert ms.rta([commit(("app/a.rb", 100, 0))]) == 0.0


def test_rta_missing_when_only_other_files():
    assert ms.rta([commit(("config/a.yml", 5, 0))]) is None


def test_rta_sums_across_commits_and_ignores_other():
    cs = [commit(("test/a.rb", 10, 0), ("README.md", 50, 0)), commit(("app/b.rb", 5, 5), msg="2")]
    assert ms.rta(cs) == pytest.approx(1.0)


def test_rta_custom_rules():
    rules = {"lib": store.Classification.APPLICATION, "t": store.Classification.TEST}
    assert ms.rta([commit(("lib/x.py", 4, 0), ("t/x.py", 2, 0))], rules) == 0.5


# ---------------------------------------------------------------- UFE


def test_ufe_union():
    cs = [commit(("a", 1, 0), ("b", 1, 0)), commit(("b", 1, 0), ("c", 1, 0), msg="2")]
    assert ms.ufe(cs) == 3


def test_ufe_empty():
    assert ms.ufe([]) == 0


def test_ufe_same_path_twice_in_commit():
    assert ms.ufe([commit(("app/a.rb", 3, 0), ("app/a.rb", 0, 3))]) == 1


# ---------------------------------------------------------------- LMC


def test_lmc_three_of_four():
    cs = [commit(("a", 1, 0), t=START + timedelta(days=2), msg="early")] + [
        commit(("a", 1, 0), t=REVIEW - timedelta(hours=h), msg=str(h)) for h in (1, 5, 11)
    ]
    assert ms.lmc(cs, WINDOW) == 0.75


def test_lmc_eleven_hours_before():
    assert ms.lmc([commit(("a", 1, 0), t=REVIEW - timedelta(hours=11))], WINDOW) == 1.0


def test_lmc_cutoff_is_inclusive():
    at = commit(("a", 1, 0), t=REVIEW - timedelta(hours=12), msg="at")
    before = commit(("a", 1, 0), t=REVIEW - timedelta(hours=12, seconds=1), msg="before")
    assert ms.lmc([at, before], WINDOW) == 0.5


def test_lmc_all_late():
    cs = [commit(("a", 1, 0), t=REVIEW - timedelta(minutes=m), msg=str(m)) for m in (0, 30, 600)]
    assert ms.lmc(cs, WINDOW) == 1.0


def test_lmc_missing_without_commits():
    assert ms.lmc([], WINDOW) is None


# ---------------------------------------------------------------- ALC


def test_alc_mean():
    assert ms.alc([commit(("a", 10, 0)), commit(("a", 15, 5), msg="2")]) == 15.0


def test_alc_single():
    assert ms.alc([commit(("a", 10, 5))]) == 15.0


def test_alc_counts_other_files():
    assert ms.alc([commit(("docs/x.md", 7, 1))]) == 8.0


def test_alc_missing():
    assert ms.alc([]) is None


# ---------------------------------------------------------------- story references


@pytest.mark.parametrize(
    "message, refs",
    [
        ("Rename class; Fixes #123", {123}),
        ("Add #12 and #13; see #12", {12, 13}),
        ("cleanup", set()),
        ("(#7) merged", {7}),
        ("see owner/repo#5 and abc#6", set()),
        ("#0 is not a story", set()),
        ("color #fff and #12a", set()),
        ("#42\n#43", {42, 43}),
    ],
)
def test_parse_story_refs(message, refs):
    assert ms.parse_story_refs(message) == refs


def test_uus_union():
    cs = [commit(("a", 1, 0), msg=m) for m in ("Fix #12", "#12 again", "Start #13")]
    assert ms.uus(cs) == 2


def test_uus_empty():
    assert ms.uus([]) == 0


# ---------------------------------------------------------------- PRC


def _comment(pr, t, cid):
    return PRCommentRecord(pr, "d1", t, "x", cid)


def test_prc_counts():
    cs = [_comment(pr, START + timedelta(days=i), str(i)) for i, pr in enumerate((1, 1, 2, 2))]
    assert ms.prc(cs) == 4
    assert ms.prc([]) == 0


def _dataset(commits=(), comments=()):
    devs = tuple(store.Developer(f"d{i}", "T") for i in (1, 2, 3))
    windows = (WINDOW, SprintWindow("T", 2, REVIEW + timedelta(hours=19), REVIEW + timedelta(days=14)))
    return store.ProjectDataset(devs, windows, tuple(commits), (), tuple(comments)).validate()


def test_prc_comment_after_review_not_counted():
    late = _comment(1, REVIEW + timedelta(days=1), "late")
    ok = _comment(1, REVIEW, "ok")
    recs = ms.compute_all(_dataset(comments=[late, ok]))
    prc = {(r.developer_id, r.sprint_id): r.value for r in recs if r.measure is MeasureId.PRC}
    assert prc[("d1", 1)] == 1
    assert prc[("d1", 2)] == 1


# ---------------------------------------------------------------- compute_all


def test_compute_all_cardinality():
    recs = ms.compute_all(_dataset())
    assert len(recs) == 3 * 2 * 6


def test_compute_all_zero_commits():
    recs = ms.compute_all(_dataset())
    for r in recs:
        if r.measure in (MeasureId.RTA, MeasureId.LMC, MeasureId.ALC):
            assert r.missing and r.value is None
        else:
            assert r.value == 0


def test_compute_all_order():
    recs = ms.compute_all(_dataset())
    assert [r.measure for r in recs[:6]] == list(ms.MEASURES)
    keys = [(r.team_id, r.developer_id, r.sprint_id) for r in recs]
    assert keys == sorted(keys)


def test_compute_all_exclude_merges():
    merge = commit(("app/a.rb", 10, 0), msg="Merge #3", merge=True)
    plain = commit(("app/a.rb", 2, 0), msg="work #4")
    base = {(r.developer_id, r.measure): r.value for r in ms.compute_all(_dataset([merge, plain])) if r.sprint_id == 1}
    excl = {
        (r.developer_id, r.measure): r.value
        for r in ms.compute_all(_dataset([merge, plain]), exclude_merges=True)
        if r.sprint_id == 1
    }
    assert base[("d1", MeasureId.ALC)] == 6.0 and excl[("d1", MeasureId.ALC)] == 2.0
    assert base[("d1", MeasureId.UUS)] == 2 and excl[("d1", MeasureId.UUS)] == 1


def test_measurement_csv_round_trip(course_dir, tmp_path):
    ds = store.load_archive(course_dir, windows=course_dir / "windows.json")
    recs = ms.compute_all(ds)
    ms.write_measurements(recs, tmp_path / "m.csv")
    back = ms.read_measurements(tmp_path / "m.csv")
    assert back == recs
    text = (tmp_path / "m.csv").read_text()
    assert text.splitlines()[0] == ",".join(ms.COLUMNS)


def test_records_are_deterministic(course_dir):
    ds = store.load_archive(course_dir, windows=course_dir / "windows.json")
    assert ms.compute_all(ds) == ms.compute_all(ds)


# ---------------------------------------------------------------- properties

paths = st.sampled_from(["app/a.rb", "app/b.rb", "spec/a_spec.rb", "test/b_test.rb", "config/x.yml", "README"])
changes = st.lists(st.tuples(paths, st.integers(0, 50), st.integers(0, 50)), min_size=1, max_size=4)
offsets = st.integers(0, int((REVIEW - START).total_seconds()))


@st.composite
def commit_lists(draw):
    items = draw(st.lists(st.tuples(changes, offsets, st.integers(0, 99)), max_size=8))
    return [
        Commit(f"s{i}", "d1", START + timedelta(seconds=off), f"#{ref}", tuple(FileChange(*c) for c in ch))
        for i, (ch, off, ref) in enumerate(items)
    ]


@given(commit_lists())
def test_measure_ranges(cs):
    r = ms.rta(cs)
    assert r is None or r >= 0
    lm = ms.lmc(cs, WINDOW)
    assert (lm is None) == (not cs)
    assert lm is None or 0.0 <= lm <= 1.0
    a = ms.alc(cs)
    assert a is None or a >= 0
    assert ms.ufe(cs) <= sum(len(c.changes) for c in cs)
    assert ms.uus(cs) <= len(cs)


@given(commit_lists(), st.randoms())
def test_measures_ignore_commit_order(cs, rnd):
    shuffled = list(cs)
    rnd.shuffle(shuffled)
    assert ms.rta(cs) == pytest.approx(ms.rta(shuffled)) if cs else True
    assert ms.ufe(cs) == ms.ufe(shuffled)
    assert ms.lmc(cs, WINDOW) == ms.lmc(shuffled, WINDOW)
    assert ms.uus(cs) == ms.uus(shuffled)


def test_compute_all_requires_windows():
    ds = store.ProjectDataset((store.Developer("d1", "T"),), (), (), (), ())
    with pytest.raises(WindowLookupError):
        ms.compute_all(ds)


def test_compute_all_team_missing_a_window():
    devs = (store.Developer("d1", "T"), store.Developer("e1", "U"))
    ds = store.ProjectDataset(devs, (WINDOW,), (), (), ())
    with pytest.raises(WindowLookupError):
        ms.compute_all(ds)
