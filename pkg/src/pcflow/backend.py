"""Selects the compiled kernel module when it is importable.

``kernels`` is the active module; ``use("python")`` or ``use("compiled")``
switches it at runtime (the latter raises ImportError when the extension was
not built).
"""

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

kernels = _compiled if _compiled is not None else _kernels_py
name = "compiled" if _compiled is not None else "python"


def available() -> list[str]:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def use(which: str) -> None:
    global kernels, name
    if which == "python":
        kernels, name = _kernels_py, "python"
    elif which == "compiled":
        if _compiled is None:
            raise ImportError("pcflow._kernels extension is not built")
        kernels, name = _compiled, "compiled"
    else:
        raise ValueError(f"unknown backend {which!r}")
