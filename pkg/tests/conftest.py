import hashlib
from pathlib import Path

import pytest

from pavideoge.corpus import load_site_profile
from pavideoge.synth import GenSpec, generate_synthetic_corpus

ROOT = Path(__file__).resolve().parent.parent
DATA = Path(__file__).resolve().parent / "data"
PROFILE_PATH = ROOT / "profiles" / "tudou-like.profile"


@pytest.fixture(scope="session")
def profile():
    return load_site_profile(PROFILE_PATH)


@pytest.fixture(scope="session")
def corpus50(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth") / "n50"
    generate_synthetic_corpus(GenSpec(n=50, topics=5), seed=7, out=out)
    return out


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(b"\0")
            h.update(p.read_bytes())
    return h.hexdigest()


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture()
def criterion():
    """Record one acceptance criterion; the outcome is printed in the summary."""

    class Recorder:
        def __call__(self, number: int, title: str):
            self.number, self.title = number, title
            ACCEPTANCE[number] = (title, False, "did not finish")
            return self

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc_type is None:
                ACCEPTANCE[self.number] = (self.title, True, "")
            else:
                ACCEPTANCE[self.number] = (self.title, False, f"{exc_type.__name__}: {exc}".splitlines()[0])
            return False

    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, why = ACCEPTANCE[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({why})" if why else ""))
