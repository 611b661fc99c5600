# Import built-in modules
import os

# Import third-party modules
import nox
from nox_actions.utils import PACKAGE_NAME
from nox_actions.utils import THIS_ROOT


def _install(session: nox.Session) -> None:
    session.install(".")
    session.install("pytest", "pytest_cov", "pytest_mock")


def pytest(session: nox.Session) -> None:
    _install(session)
    test_root = os.path.join(THIS_ROOT, "tests")
    session.run(
        "pytest",
        f"--cov={PACKAGE_NAME}",
        "--cov-report=xml:coverage.xml",
        "--cov-report=term-missing",
        f"--rootdir={test_root}",
        *session.posargs,
        env={"PYTHONPATH": THIS_ROOT.as_posix()},
    )


def pytest_slow(session: nox.Session) -> None:
    """Convergence studies and end-to-end pipeline runs."""
    _install(session)
    session.run("pytest", "-m", "slow", *session.posargs, env={"PYTHONPATH": THIS_ROOT.as_posix()})


def build(session: nox.Session) -> None:
    session.install("poetry")
    session.run("poetry", "build")
