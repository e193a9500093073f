from collections.abc import Callable
from functools import wraps
import hashlib
import os
import tempfile
from typing import Any, ParamSpec, TypeVar

_R = TypeVar("_R")
_S = ParamSpec("_S")

PathArg = str | os.PathLike[str]


def _find_path_argument(args: tuple[Any, ...], kwargs: dict[str, Any]) -> object:
    """Return the first argument that looks like a filesystem path (for error messages only)."""
    if "path" in kwargs:
        return kwargs["path"]

    for arg in args:
        if isinstance(arg, (str, os.PathLike)):
            return arg

    return "<unknown path>"


def access_error_handler(func: Callable[_S, _R]) -> Callable[_S, _R]:
    """Wrap functions that access files to catch permission errors and file not found errors.

    The offending path is looked up among the call arguments, so the wrapped function does not need
    to take its path as the first positional argument.
    """

    @wraps(func)
    def wrapper(*args: _S.args, **kwargs: _S.kwargs) -> _R:
        try:
            return func(*args, **kwargs)
        except FileNotFoundError:
            path = _find_path_argument(args, kwargs)
            raise FileNotFoundError(f"Path does not exist: {path}. Failed during {func.__name__}.")
        except PermissionError:
            path = _find_path_argument(args, kwargs)
            raise PermissionError(f"Permission denied: {path}. Failed during {func.__name__}.")
        except IsADirectoryError:
            path = _find_path_argument(args, kwargs)
            raise IsADirectoryError(f"Expected a file but found a directory: {path}. Failed during {func.__name__}.")
        except OSError as e:
            path = _find_path_argument(args, kwargs)
            raise OSError(f"Failed to access {path} during {func.__name__}. Reason: {e}")

    return wrapper


@access_error_handler
def write_text_atomic(path: PathArg, data: str, *, encoding: str = "utf-8") -> None:
    """Write the given text to `path` atomically, so that on an error the previous state of the file is preserved.

    The temporary file is created next to the destination so that the final rename never crosses filesystems.

    >>> write_text_atomic("results.csv", "x\\n1.0\\n2.0\\n")

    :param path: The destination file
    :param data: The text to write
    :param encoding: The encoding to use
    """
    parent = os.path.dirname(os.path.abspath(os.fspath(path)))
    fd, temp_path = tempfile.mkstemp(prefix=".localflow-", suffix=".tmp", dir=parent)

    try:
        with os.fdopen(fd, mode="w", encoding=encoding, newline="") as f:
            f.write(data)
        os.replace(temp_path, path)
    except Exception:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise


@access_error_handler
def sha256_of(path: PathArg) -> str:
    """Return the hex SHA-256 digest of the file at `path`.

    :param path: The file to hash
    :returns: The digest as a lowercase hex string
    """
    digest = hashlib.sha256()
    with open(path, mode="rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path_for(path: PathArg) -> str:
    """Return the sidecar manifest path belonging to an output file.

    >>> manifest_path_for("out/sweep.csv")
    'out/sweep.csv.manifest.txt'
    """
    return f"{os.fspath(path)}.manifest.txt"
