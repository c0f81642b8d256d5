#!/usr/bin/env python3
"""Convert public multiple-choice benchmark files into dail's JSONL format.

Supported inputs:

  csv-dir   A directory of per-subject CSV files in the common four-choice
            layout (question, option A..D, answer letter), one row per
            question, no header. The subset name is the file stem with a
            trailing "_test"/"_val"/"_dev" stripped.

  hf-jsonl  A JSON-lines file where each object has "question",
            "choices" (list of strings), "answer" (0-based index or a
            letter), and optionally "subject".

Output: one JSON object per line with the fields id, subset, question,
choices (ordered label -> text map) and gold, which is what `dail run
--dataset` expects.

Examples:
  python3 scripts/convert_dataset.py csv-dir data/test/ mmlu_test.jsonl
  python3 scripts/convert_dataset.py hf-jsonl mmlu.jsonl converted.jsonl
"""

import argparse
import csv
import json
import pathlib
import string
import sys

LETTERS = string.ascii_uppercase


def rows_from_csv_dir(directory: pathlib.Path):
    for path in sorted(directory.glob("*.csv")):
        subset = path.stem
        for suffix in ("_test", "_val", "_dev"):
            if subset.endswith(suffix):
                subset = subset[: -len(suffix)]
                break
        with path.open(newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if len(row) < 3:
                    raise SystemExit(f"{path}:{i + 1}: need question, choices, answer")
                question, *choices, answer = row
                yield subset, question, choices, answer.strip().upper()


def rows_from_hf_jsonl(path: pathlib.Path):
    with path.open(encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise SystemExit(f"{path}:{i + 1}: {e}")
            answer = obj["answer"]
            if isinstance(answer, int):
                answer = LETTERS[answer]
            yield (
                obj.get("subject", "default"),
                obj["question"],
                list(obj["choices"]),
                str(answer).strip().upper(),
            )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("format", choices=["csv-dir", "hf-jsonl"])
    parser.add_argument("source", type=pathlib.Path)
    parser.add_argument("output", type=pathlib.Path)
    args = parser.parse_args()

    rows = (
        rows_from_csv_dir(args.source)
        if args.format == "csv-dir"
        else rows_from_hf_jsonl(args.source)
    )

    counters = {}
    n = 0
    with args.output.open("w", encoding="utf-8") as out:
        for subset, question, choices, answer in rows:
            labels = LETTERS[: len(choices)]
            if answer not in labels:
                raise SystemExit(
                    f"answer {answer!r} outside labels {labels!r} in subset {subset}"
                )
            counters[subset] = counters.get(subset, 0) + 1
            entry = {
                "id": f"{subset}_{counters[subset] - 1:05d}",
                "subset": subset,
                "question": question,
                "choices": {l: c for l, c in zip(labels, choices)},
                "gold": answer,
            }
            out.write(json.dumps(entry, ensure_ascii=False) + "\n")
            n += 1

    print(f"wrote {n} entries across {len(counters)} subsets to {args.output}")
    if n == 0:
        sys.exit("no entries converted")


if __name__ == "__main__":
    main()
