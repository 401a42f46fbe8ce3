import numpy as np
import pytest

from sceif.dictionary import build_mixed


@pytest.fixture(scope="session")
def d8():
    return build_mixed(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def smooth_image(rng, shape=(64, 64), channels=None, bits=8):
    """Low-frequency random field in [0, 2**bits - 1] (compressible like a photo)."""
    full = shape if channels is None else (*shape, channels)
    coarse = rng.uniform(0, 1, size=(shape[0] // 8 + 2, shape[1] // 8 + 2) + full[2:])
    from scipy.ndimage import zoom

    factors = (8, 8) + (1,) * (len(full) - 2)
    img = zoom(coarse, factors, order=3)[: shape[0], : shape[1]]
    img = (img - img.min()) / (img.max() - img.min() + 1e-12)
    return np.round(img * (2**bits - 1))


# Acceptance reporting: one line per criterion at the end of the run ----------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.outcome == "skipped" or (report.when == "setup" and report.failed):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        detail = props.get("detail", "")
        if report.outcome == "skipped" and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2]
        n = props["criterion"]
        if n in _CRITERIA:  # parametrized criterion: keep the worst status, join details
            old_status, _, old_detail = _CRITERIA[n]
            rank = ["PASS", "SKIP", "FAIL"]
            status = max(old_status, status, key=rank.index)
            detail = f"{old_detail}; {detail}"
        _CRITERIA[n] = (status, props.get("title", ""), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {status}: {title} | {detail}")
