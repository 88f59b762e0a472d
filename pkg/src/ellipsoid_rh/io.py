"""Run configuration, atomic file output and manifests."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

_INT_KEYS = {"l", "m", "grid_n", "lmax", "mmax", "save_every", "fd_order", "degree"}
_FLOAT_KEYS = {"b", "omega", "c", "tol", "dt", "T", "T_cap"}
_LIST_KEYS = {"n_list"}
_STR_KEYS = {"initial", "backend"}


@dataclass
class RunConfig:
    """Flat experiment configuration; every field has a default."""

    b: float = 0.9
    omega: float = 1.0
    l: int = 2
    m: int = 1
    c: float = 0.3
    grid_n: int = 256
    tol: float = 1e-10
    lmax: int | None = None
    n_list: list = field(default_factory=lambda: [1, 2, 5, 10, 100])
    dt: float = 0.005
    T: float = 1.0
    T_cap: float = 20.0
    mmax: int | None = None
    save_every: int = 20
    initial: str = "stationary"
    backend: str = "spectral"
    fd_order: int = 6
    degree: int = 5

    def validate(self) -> "RunConfig":
        if not 0.0 < self.b <= 1.0:
            raise ConfigError(f"b out of range: {self.b} (need 0 < b <= 1)")
        if not self.omega == self.omega or abs(self.omega) == float("inf"):
            raise ConfigError("omega must be finite")
        if self.grid_n < 64 or self.grid_n % 2:
            raise ConfigError(f"grid_n must be an even integer >= 64, got {self.grid_n}")
        if self.l < 0 or abs(self.m) > self.l:
            raise ConfigError(f"need |m| <= l, got l={self.l}, m={self.m}")
        if not self.tol > 0.0:
            raise ConfigError("tol must be positive")
        if self.lmax is not None and self.lmax < abs(self.m):
            raise ConfigError("lmax must be >= |m|")
        if self.dt <= 0.0 or self.T < 0.0:
            raise ConfigError("need dt > 0 and T >= 0")
        if not self.n_list or any(int(n) < 1 for n in self.n_list):
            raise ConfigError("n_list entries must be positive integers")
        if self.initial not in ("stationary", "traveling", "zonal"):
            raise ConfigError(f"unknown initial state {self.initial!r}")
        if self.backend not in ("spectral", "fd"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.degree not in (3, 5):
            raise ConfigError("degree must be 3 or 5")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def _convert(key: str, raw):
    try:
        if key in _INT_KEYS:
            if isinstance(raw, str) and raw.strip().lower() in ("", "none"):
                return None
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _LIST_KEYS:
            if isinstance(raw, str):
                raw = [p for p in raw.replace(",", " ").split() if p]
            return [int(p) for p in raw]
        if key in _STR_KEYS:
            return str(raw).strip()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _convert(key, value)
    return out


def load_config(path: str | os.PathLike | None, overrides: dict | None = None) -> RunConfig:
    """Read a key-value file (or a run manifest) and apply overrides."""
    values = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        if p.suffix == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {p}") from exc
            data = data.get("config", data)
            values = {k: _convert(k, v) if v is not None else None for k, v in data.items()}
        else:
            values = parse_config_text(text)
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values).validate()


def write_atomic(path: str | os.PathLike, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    return write_atomic(path, dumps(obj))


def write_manifest(out: str | os.PathLike, command: str, config: RunConfig, files: list,
                   extra: dict | None = None) -> Path:
    from . import __version__

    manifest = {
        "command": command,
        "config": config.to_dict(),
        "artifact_version": __version__,
        "files": sorted(files),
    }
    if extra:
        manifest.update(extra)
    return write_json(Path(out) / "manifest.json", manifest)
