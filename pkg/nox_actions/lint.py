# Import third-party modules
import nox
from nox_actions.utils import PACKAGE_NAME


def lint(session: nox.Session) -> None:
    session.install("ruff")
    session.run("ruff", "check", PACKAGE_NAME, "tests")
    session.run("ruff", "format", "--check", PACKAGE_NAME, "tests")


def lint_fix(session: nox.Session) -> None:
    session.install("ruff", "autoflake")
    session.run("ruff", "check", "--fix", PACKAGE_NAME, "tests")
    session.run("ruff", "format", PACKAGE_NAME, "tests")
    session.run("autoflake", "--in-place", "--recursive", "--remove-all-unused-imports", PACKAGE_NAME)
