"""Bundled benchmark tasksets and processor descriptions."""

from importlib import resources
from typing import List

from .power import ProcessorSpec, load_processor
from .taskmodel import Taskset, load_taskset, taskset_density

_PKG = "dvfsched"


def _path(kind: str, name: str):
    stem = name[:-5] if name.endswith(".json") else name
    return resources.files(_PKG) / "data" / kind / (stem + ".json")


def bundled_taskset(name: str) -> Taskset:
    """``name`` is a file stem such as ``"d04"``."""
    with resources.as_file(_path("tasksets", name)) as p:
        return load_taskset(p)


def bundled_processor(name: str) -> ProcessorSpec:
    with resources.as_file(_path("processors", name)) as p:
        return load_processor(p)


def taskset_names() -> List[str]:
    d = resources.files(_PKG) / "data" / "tasksets"
    return sorted(f.name[:-5] for f in d.iterdir() if f.name.endswith(".json"))


def bundled_tasksets() -> List[Taskset]:
    """All bundled tasksets ordered by density."""
    sets = [bundled_taskset(n) for n in taskset_names()]
    return sorted(sets, key=taskset_density)


def data_dir(kind: str):
    """Filesystem path of a bundled data directory (``tasksets`` or ``processors``)."""
    return resources.files(_PKG) / "data" / kind
