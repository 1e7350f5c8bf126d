# Copyright 2026 The twostage Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Runs the CLI end to end and validates its JSON reports against the schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def run(binary, *args):
    result = subprocess.run([binary, *args], capture_output=True, text=True, check=False)
    if result.returncode != 0:
        sys.exit(f"{' '.join(args)} exited {result.returncode}: {result.stderr}")
    return result.stdout


def main():
    binary, schema_path, config = sys.argv[1:4]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        manifest = str(work / "data" / "manifest.jsonl")
        run(binary, "--config", config, "synth", "--out", str(work / "data"))
        run(binary, "--config", config, "train", "--manifest", manifest, "--out", str(work / "ts"))
        run(binary, "--config", config, "train-baseline", "--manifest", manifest,
            "--out", str(work / "bl"))

        reports = {
            "eval two-stage": run(binary, "--format", "json", "eval", "--checkpoint",
                                  str(work / "ts"), "--manifest", manifest),
            "eval true routing": run(binary, "--format", "json", "eval", "--checkpoint",
                                     str(work / "ts"), "--manifest", manifest,
                                     "--routing", "true", "--split", "train"),
            "eval baseline": run(binary, "--format", "json", "eval", "--checkpoint",
                                 str(work / "bl"), "--manifest", manifest),
            "compare": run(binary, "--format", "json", "compare", "--checkpoint",
                           str(work / "ts"), "--checkpoint", str(work / "bl"),
                           "--manifest", manifest),
        }
        failed = False
        for name, text in reports.items():
            errors = list(validator.iter_errors(json.loads(text)))
            for error in errors:
                print(f"{name}: {error.json_path}: {error.message}")
            failed = failed or bool(errors)
            print(f"{'FAIL' if errors else 'ok'}: {name}")

        # Wrong shapes must be caught too.
        broken = json.loads(reports["eval baseline"])
        broken["evaluation"]["metrics"]["accuracy"] = 1.5
        if validator.is_valid(broken):
            print("FAIL: schema accepted an accuracy of 1.5")
            failed = True
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
