import concurrent.futures
import dataclasses
import functools
import json
import logging
import os
import typing

import numpy as np

ROOT_LOG = logging.getLogger()
log = ROOT_LOG.getChild("pencilab")

LOG_LEVEL = getattr(logging, os.environ.get("PENCILAB_LOG_LEVEL", "info").upper())
log.setLevel(LOG_LEVEL)

ROOT_LOG_LEVEL = getattr(
    logging, os.environ.get("PENCILAB_ROOT_LOG_LEVEL", "info").upper()
)
ROOT_LOG.setLevel(ROOT_LOG_LEVEL)

try:
    from .__version__ import version as __version__
except ImportError:  # pragma: no cover
    __version__ = "0.0.0+unknown"


T = typing.TypeVar("T")
R = typing.TypeVar("R")


def _env_bool(value: str) -> bool:
    return value.strip().lower() in ("1", "true", "yes", "on")


@dataclasses.dataclass(frozen=True)
class Settings:
    fd_step: float = 1e-4
    degeneracy: float = 1e-12
    threads: int = 1
    real_mode: bool = False
    cond_limit: float = 1e12
    solver_tol: float = 1e-10

    @classmethod
    def from_env(cls, env: typing.Optional[typing.Mapping[str, str]] = None) -> "Settings":
        env = env if env is not None else dict(os.environ)
        return cls(
            fd_step=float(env.get("PENCILAB_FD_STEP", cls.fd_step)),
            degeneracy=float(env.get("PENCILAB_DEGENERACY", cls.degeneracy)),
            threads=int(env.get("PENCILAB_THREADS", cls.threads)),
            real_mode=_env_bool(env.get("PENCILAB_REAL_MODE", "")),
            cond_limit=float(env.get("PENCILAB_COND_LIMIT", cls.cond_limit)),
            solver_tol=float(env.get("PENCILAB_SOLVER_TOL", cls.solver_tol)),
        )


@functools.lru_cache(maxsize=2)
def get_settings() -> Settings:
    return Settings.from_env()


@functools.lru_cache(maxsize=4)
def get_executor(threads: int) -> concurrent.futures.ThreadPoolExecutor:
    return concurrent.futures.ThreadPoolExecutor(
        max_workers=threads, thread_name_prefix="pencilab"
    )


def parallel_map(
    func: typing.Callable[[T], R],
    items: typing.Iterable[T],
    threads: typing.Optional[int] = None,
) -> typing.List[R]:
    threads = threads if threads is not None else get_settings().threads
    if threads <= 1:
        return [func(item) for item in items]
    return list(get_executor(threads).map(func, items))


class AsJSONEncoder(json.JSONEncoder):
    def default(self, o: typing.Any) -> typing.Any:
        if hasattr(o, "as_json") and callable(o.as_json):
            return o.as_json()
        if isinstance(o, (complex, np.complexfloating)):
            return [float(o.real), float(o.imag)]
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if hasattr(o, "__dict__"):
            return o.__dict__
        return json.JSONEncoder.default(self, o)  # pragma: no cover
