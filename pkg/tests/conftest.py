import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import pytest

from rewlang.parser import parse_program

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def corpus_dir() -> pathlib.Path:
    return CORPUS


def load_corpus(name: str):
    path = CORPUS / name
    return parse_program(path.read_text(), str(path))


def corpus_files():
    return sorted(CORPUS.glob("*.trs"))
