"""System files: JSON documents validated against a shipped schema."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .model import DarbouxSystem, OneForm
from .poly import PolySyntaxError, parse_poly

__all__ = [
    "SystemSpecError",
    "LoadedSystem",
    "load_schema",
    "load_system",
    "parse_system",
    "fixture_path",
    "FIXTURES",
    "atomic_write",
]

FIXTURES = ("model", "model_exact", "shifted")


class SystemSpecError(ValueError):
    """Invalid system document; ``path`` points into the JSON document."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass(frozen=True)
class LoadedSystem:
    system: DarbouxSystem
    document: dict
    digest: str  # sha256 of the canonical document

    @property
    def name(self) -> str:
        return self.document.get("name", "system")


def load_schema() -> dict:
    text = resources.files("pseudoabel").joinpath("data/system.schema.json").read_text()
    return json.loads(text)


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}")
    return Path(str(resources.files("pseudoabel").joinpath(f"data/{name}.json")))


def _json_path(parts) -> str:
    return "/".join(str(p) for p in parts)


def parse_system(doc: dict) -> LoadedSystem:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SystemSpecError(e.message, _json_path(e.absolute_path))

    def poly(text, path):
        try:
            return parse_poly(text)
        except PolySyntaxError as exc:
            raise SystemSpecError(str(exc), path) from None

    p0 = poly(doc["p0"], "p0")
    factors = tuple((poly(f["poly"], f"factors/{i}/poly"), f["exponent"])
                    for i, f in enumerate(doc["factors"]))
    eta = None
    if "eta" in doc:
        eta = OneForm(poly(doc["eta"]["dx"], "eta/dx"), poly(doc["eta"]["dy"], "eta/dy"))
    kw = {}
    if "domain" in doc:
        x0, x1, y0, y1 = doc["domain"]
        if not (x0 < x1 and y0 < y1):
            raise SystemSpecError("domain must be [xmin, xmax, ymin, ymax] with min < max", "domain")
        kw["domain"] = tuple(doc["domain"])
    sys = DarbouxSystem(p0, factors, doc["epsilon"], eta=eta, **kw)
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return LoadedSystem(sys, doc, hashlib.sha256(canon.encode()).hexdigest())


def load_system(path: str | os.PathLike) -> LoadedSystem:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SystemSpecError(f"not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_system(doc)


def atomic_write(path: str | os.PathLike, data: str | bytes):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
