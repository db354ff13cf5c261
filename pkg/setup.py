import re
import sys
import typing

from setuptools import Command, setup
from setuptools_scm import get_version


class IsReleasableCommand(Command):
    """Print whether the scm version is a plain release tag."""

    description: str = "determine if current version is releasable"
    user_options: typing.List[
        typing.Tuple[typing.Optional[str], typing.Optional[str], str]
    ] = []

    def initialize_options(self) -> None:
        ...

    def finalize_options(self) -> None:
        ...

    def run(self) -> None:
        value = get_version()
        releasable = re.match("^[0-9]+\\.[0-9]+\\.[0-9]+$", value) is not None
        print(f"pencilab {value} is {'' if releasable else 'NOT '}releasable")


def main() -> int:
    if sys.version_info[:2] < (3, 8):
        print(f"ERROR: pencilab requires python 3.8+, this python is {sys.version}")
        return 86

    setup(cmdclass=dict(is_releasable=IsReleasableCommand))
    return 0


if __name__ == "__main__":
    sys.exit(main())
