#!/usr/bin/env python3
"""Validate sparseworld JSON reports against the checked-in schema.

Beyond the schema, checks that every number is finite and that each
`*_avg` field equals the mean of its per-horizon list within 1e-9.
"""
import argparse
import json
import math
import sys
from pathlib import Path

import jsonschema

DEFAULT_SCHEMA = Path(__file__).resolve().parent.parent / "schema" / "report.schema.json"


def reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def check_averages(node, path, errors):
    if isinstance(node, dict):
        for key, value in node.items():
            if key.endswith("_avg"):
                base = key[: -len("_avg")]
                series = node.get(base)
                if isinstance(series, list) and series:
                    mean = sum(series) / len(series)
                    if abs(mean - value) > 1e-9:
                        errors.append(f"{path}/{key}: {value} is not the mean {mean} of {base}")
            check_averages(value, f"{path}/{key}", errors)
    elif isinstance(node, list):
        for i, value in enumerate(node):
            check_averages(value, f"{path}/{i}", errors)


def validate(report_path, validator):
    text = Path(report_path).read_text()
    report = json.loads(text, parse_constant=reject_constant)
    errors = [f"{'/'.join(map(str, e.path))}: {e.message}" for e in validator.iter_errors(report)]
    check_averages(report, "", errors)
    return errors


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("reports", nargs="+")
    parser.add_argument("--schema", default=str(DEFAULT_SCHEMA))
    args = parser.parse_args()

    schema = json.loads(Path(args.schema).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    failed = False
    for report in args.reports:
        try:
            errors = validate(report, validator)
        except (OSError, ValueError) as exc:
            errors = [str(exc)]
        for err in errors:
            print(f"{report}: {err}")
        print(f"{report}: {'FAIL' if errors else 'ok'}")
        failed |= bool(errors)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
