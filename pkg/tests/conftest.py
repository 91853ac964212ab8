import json
import os

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def load_jsonl(name: str) -> list[dict]:
    with open(fixture_path(name), encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_json(name: str) -> dict:
    with open(fixture_path(name), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def corpus() -> list[dict]:
    return load_jsonl("corpus.jsonl")
