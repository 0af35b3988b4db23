"""Validates CLI reports against the shipped JSON schema."""

import json
import os
import subprocess
import sys
import tempfile

import jsonschema

RUNS = [
    ["analyze", "--metric", "euclidean", "--grid", "3", "--random-points", "4", "--orbit-points", "32"],
    ["analyze", "--metric", "sphere", "--grid", "2", "--random-points", "2", "--orbit-points", "512",
     "--map-samples", "4", "--assume-connected"],
    ["analyze", "--metric", "product", "--grid", "2", "--random-points", "2", "--orbit-points", "64"],
    ["rank-map", "--metric", "custom", "--metric-params", '{"matrix": ["1", "0", "0", "x1"]}', "--grid", "3",
     "--random-points", "2", "--csv", ""],
    ["holonomy", "--metric", "funk", "--orbit-points", "8"],
    ["classify", "--metric", "euclidean", "--map", "scale:{\"factor\": 2}", "--map", "cubic"],
]


def main():
    cli, schema_path = sys.argv[1], sys.argv[2]
    with open(schema_path) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, args in enumerate(RUNS):
            out = os.path.join(tmp, f"report{i}.json")
            proc = subprocess.run([cli, *args, "-o", out], capture_output=True, text=True)
            label = " ".join(args[:3])
            if proc.returncode != 0:
                print(f"FAIL {label}: exit {proc.returncode}: {proc.stderr.strip()}")
                failures += 1
                continue
            with open(out) as f:
                text = f.read()
            if "NaN" in text or "Infinity" in text:
                print(f"FAIL {label}: non-finite number in report")
                failures += 1
                continue
            errors = sorted(validator.iter_errors(json.loads(text)), key=lambda e: list(e.path))
            for e in errors[:5]:
                print(f"FAIL {label}: {'/'.join(map(str, e.path))}: {e.message}")
            failures += bool(errors)
            if not errors:
                print(f"PASS {label}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
