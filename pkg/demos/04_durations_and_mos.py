"""Token durations from a teacher attention matrix, and MOS aggregation.

    python demos/04_durations_and_mos.py
"""

import numpy as np

from corpusforge.evaluate import aggregate_mos, durations_to_path, extract_durations, mos_by_system, mos_table, read_mos_csv

# A blurred diagonal attention over 5 tokens and 17 decoder frames.
rng = np.random.default_rng(4)
true = [3, 5, 2, 4, 3]
path = durations_to_path(true)
att = np.full((len(path), len(true)), 0.02)
for t, k in enumerate(path):
    att[t, k] = 0.7
    if k + 1 < len(true):
        att[t, k + 1] = 0.2
att += 0.05 * rng.random(att.shape)
att /= att.sum(axis=1, keepdims=True)

d = extract_durations(att)
print("true durations     ", true)
print("extracted durations", list(d.durations), f"(sum {sum(d.durations)} = {att.shape[0]} frames)")

# MOS with a normal-approximation 95% interval.
print("\n[4,4,4,4,5,5,5,5] ->", aggregate_mos([4, 4, 4, 4, 5, 5, 5, 5]).format())

rows = ["rater_id,sample_id,system_id,score"]
for rater in range(20):
    for sample in range(10):
        rows.append(f"r{rater},s{sample},GT,{min(5, max(1, round(rng.normal(4.9, 0.3))))}")
        rows.append(f"r{rater},s{sample},7V,{min(5, max(1, round(rng.normal(4.1, 0.8))))}")
print()
print(mos_table(mos_by_system(read_mos_csv("\n".join(rows))), label="Int."))
