import json
import pathlib
import sys

import pytest

HERE = pathlib.Path(__file__).parent
sys.path.insert(0, str(HERE))
SCHEMAS = HERE.parent / "schemas"


def load_schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


@pytest.fixture(scope="session")
def schema():
    import jsonschema

    def check(name, doc):
        jsonschema.validate(doc, load_schema(name))
        return doc

    return check


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    results = getattr(acc, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, title, detail = results[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  #{num:<2} {title}: {detail}")
