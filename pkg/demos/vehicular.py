"""Run the shipped vehicular scenario in both modes and print the
comparison table. Equivalent to the CLI sequence

    iotqos run --config scenarios/vehicular-default.json --mode baseline --out b.csv
    iotqos run --config scenarios/vehicular-default.json --mode adaptive --out a.csv
    iotqos compare --baseline b.csv --adaptive a.csv
"""

import dataclasses
from pathlib import Path

from iotqos.scenario import Mode, compare, load_config, parse_csv, run_scenario

cfg = load_config(Path(__file__).resolve().parents[1] / "scenarios" / "vehicular-default.json")
runs = {mode: run_scenario(dataclasses.replace(cfg, mode=mode)) for mode in Mode}
for mode, log in runs.items():
    print(f"{mode.value}: {log.requests} requests, {log.failed} failed")

table, verdicts = compare(parse_csv(runs[Mode.BASELINE].to_csv()),
                          parse_csv(runs[Mode.ADAPTIVE].to_csv()))
print(table)

print("\nadaptation events:")
for e in runs[Mode.ADAPTIVE].events:
    print(" ", e)
