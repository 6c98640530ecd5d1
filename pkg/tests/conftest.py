import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from toydata import make_dataset, write_idx_dir  # noqa: E402

from pcann.cli import MNIST_FILES  # noqa: E402

MNIST_DIR = os.path.abspath(
    os.environ.get("PCANN_MNIST_DIR", os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
)


def mnist_paths():
    """Paths of the four MNIST files, or None when any is missing."""
    out = {}
    for key, name in MNIST_FILES.items():
        for candidate in (os.path.join(MNIST_DIR, name), os.path.join(MNIST_DIR, name + ".gz")):
            if os.path.exists(candidate):
                out[key] = candidate
                break
        else:
            return None
    return out


@pytest.fixture(scope="session")
def toy_train():
    return make_dataset(60, seed=0)


@pytest.fixture(scope="session")
def toy_test():
    return make_dataset(20, seed=1)


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    return write_idx_dir(str(tmp_path_factory.mktemp("toy_mnist")))


@pytest.fixture(scope="session")
def mnist():
    """Loaded MNIST train/test datasets; skips when the files are absent."""
    from pcann.dataset_io import load_dataset

    paths = mnist_paths()
    if paths is None:
        pytest.skip(f"MNIST IDX files not found under {MNIST_DIR} (set PCANN_MNIST_DIR)")
    return (
        load_dataset(paths["train_images"], paths["train_labels"]),
        load_dataset(paths["test_images"], paths["test_labels"]),
    )


# ---- acceptance reporting: one line per criterion in the terminal summary ----

_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    # the call phase decides; a failed or skipped setup never reaches it
    if rep.when != "call" and (rep.when != "setup" or rep.passed):
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "notes": []})
    if not rep.passed:
        entry["ok"] = False
        crash = getattr(rep.longrepr, "reprcrash", None)
        msg = crash.message if crash is not None else str(rep.longrepr).strip()
        entry["notes"].append(msg.splitlines()[0] if msg else rep.outcome)
    for key, value in item.user_properties:
        if key == "measured":
            entry["notes"].append(value)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["ok"] else "FAIL"
        notes = "; ".join(entry["notes"])
        terminalreporter.write_line(f"[{status}] {number:>2}. {entry['title']}" + (f" -- {notes}" if notes else ""))
