#!/usr/bin/env python3
"""Validate fppgeo run manifests against schemas/manifest.schema.json."""

import argparse
import json
import pathlib
import sys

import jsonschema

SCHEMA = pathlib.Path(__file__).resolve().parent.parent / "schemas" / "manifest.schema.json"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("manifests", nargs="+", type=pathlib.Path)
    parser.add_argument("--schema", type=pathlib.Path, default=SCHEMA)
    args = parser.parse_args()

    schema = json.loads(args.schema.read_text())
    validator = jsonschema.Draft202012Validator(schema)
    failed = 0
    for path in args.manifests:
        errors = sorted(validator.iter_errors(json.loads(path.read_text())), key=lambda e: list(e.path))
        for e in errors:
            where = "/".join(str(p) for p in e.path) or "<root>"
            print(f"{path}: {where}: {e.message}", file=sys.stderr)
        failed += bool(errors)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
