"""Direct-mode rules for the four bundled benchmarks, with the reference bands."""

from rexkit import pipeline

rows = pipeline.reproduce()
for row in rows:
    print(f"== {row.name}")
    print(row.rules.render())
    print()

print(pipeline.render_reproduction(rows))
