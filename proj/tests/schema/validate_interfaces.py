"""Validates the files the native tools exchange with other implementations
against the JSON Schemas in schemas/."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource

root = pathlib.Path(sys.argv[1])
cli = sys.argv[2]
schemas = {p.name: json.loads(p.read_text()) for p in (root / "schemas").glob("*.json")}
registry = Registry().with_resources(
    (s["$id"], Resource.from_contents(s)) for s in schemas.values()
).with_resources((name, Resource.from_contents(s)) for name, s in schemas.items())


def check(schema, doc, what):
    jsonschema.Draft202012Validator(schemas[schema], registry=registry).validate(doc)
    print(f"ok  {what} against {schema}")


def must_fail(schema, doc, what):
    try:
        check(schema, doc, what)
    except jsonschema.ValidationError:
        print(f"ok  {what} rejected by {schema}")
        return
    raise SystemExit(f"FAIL {what} should not validate against {schema}")


fixtures = root / "tests" / "fixtures"
config = json.loads((fixtures / "experiment-tiny.json").read_text())
check("config.schema.json", config, "experiment-tiny.json")
must_fail("config.schema.json", {**config, "temperature": 0.7}, "config with an unknown key")
must_fail("config.schema.json", {**config, "sweep": ["z_2", "z_o"]}, "sweep not starting with z_o")

check("grids.schema.json", json.loads((root / "core" / "data" / "grids.json").read_text()), "core/data/grids.json")

for n, line in enumerate((fixtures / "rigged-20.jsonl").read_text().splitlines(), 1):
    check("dataset-item.schema.json", json.loads(line), f"rigged-20.jsonl line {n}")

header = (fixtures / "tiny-4L.bin").read_bytes().split(b"\n", 1)[0]
check("weights-header.schema.json", json.loads(header), "tiny-4L.bin header")

with tempfile.TemporaryDirectory() as tmp:
    out = pathlib.Path(tmp)
    subprocess.run([cli, "run", "--config", str(fixtures / "experiment-tiny.json"), "--out", str(out / "run"),
                    "--format", "json"], check=True, stdout=subprocess.DEVNULL)
    report = json.loads((out / "run" / "report.json").read_text())
    check("report.schema.json", report, "report.json from the native runner")
    broken = json.loads(json.dumps(report))
    broken["points"][0]["delta_vs_zo"] = 0.1
    must_fail("report.schema.json", broken, "report with nonzero delta(z_o)")

    for demo in ("frontdoor", "template"):
        path = out / f"{demo}.json"
        subprocess.run([cli, "scm", "--demo", demo, "--seed", "5", "--save", str(path)], check=True,
                       stdout=subprocess.DEVNULL)
        check("scm.schema.json", json.loads(path.read_text()), f"scm --demo {demo} --save")
