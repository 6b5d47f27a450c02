"""Compute the six measurements for the small hand-built course archive in tests/fixtures."""

from pathlib import Path

from scrumlens import measurements, store

course = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "course"
ds = store.load_archive(course, windows=course / "windows.json")

rows = {}
for r in measurements.compute_all(ds):
    rows.setdefault((r.team_id, r.developer_id, r.sprint_id), {})[r.measure.value] = r.value

header = ["team", "dev", "sprint", *(m.value for m in measurements.MEASURES)]
print("  ".join(f"{h:>6}" for h in header))
for (team, dev, sprint), vals in rows.items():
    cells = ["-" if v is None else f"{v:.3g}" for v in vals.values()]
    print("  ".join(f"{c:>6}" for c in (team, dev, str(sprint), *cells)))
