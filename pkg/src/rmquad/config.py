"""Run configuration: defaults, key=value config files and mesh specifications."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .mapping import RotationVariant
from .mesh import (
    TRAPEZOID_PATTERNS,
    QuadMesh,
    generate_perturbed_mesh,
    generate_trapezoid_sequence,
    read_mesh,
)

EXPERIMENTS = ("convergence", "locking", "single-solve")
DEFAULT_SWEEP = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
DEFAULT_MESH = {
    "convergence": "trapezoid:5:0.25",
    "locking": "perturbed:8:0.2:42",
    "single-solve": "trapezoid:3:0.25",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeshSpec:
    """Parsed ``trapezoid:levels:distortion``, ``perturbed:n:jitter:seed`` or ``file:path``."""

    kind: str
    levels: int = 5
    distortion: float = 0.25
    pattern: str = "self-similar"
    n: int = 8
    jitter: float = 0.2
    seed: int = 42
    path: str | None = None

    @classmethod
    def parse(cls, text: str) -> "MeshSpec":
        kind, _, rest = text.strip().partition(":")
        parts = [p for p in rest.split(":") if p] if rest else []
        try:
            if kind == "trapezoid":
                if len(parts) > 2:
                    raise ConfigError(f"too many fields in mesh spec {text!r}")
                vals = {}
                if len(parts) > 0:
                    vals["levels"] = int(parts[0])
                if len(parts) > 1:
                    vals["distortion"] = float(parts[1])
                return cls(kind, **vals)
            if kind == "perturbed":
                if len(parts) > 3:
                    raise ConfigError(f"too many fields in mesh spec {text!r}")
                keys, types = ("n", "jitter", "seed"), (int, float, int)
                return cls(kind, **{k: f(p) for k, f, p in zip(keys, types, parts)})
            if kind == "file":
                if not rest:
                    raise ConfigError("file mesh spec needs a path")
                return cls(kind, path=rest)
        except ValueError as exc:
            raise ConfigError(f"bad mesh spec {text!r}: {exc}") from exc
        raise ConfigError(f"unknown mesh kind {kind!r}")

    def sequence(self) -> list[QuadMesh]:
        """All meshes of the spec: the trapezoid levels, or a single mesh."""
        if self.kind == "trapezoid":
            return generate_trapezoid_sequence(self.levels, self.distortion, self.pattern)
        if self.kind == "perturbed":
            return [generate_perturbed_mesh(self.n, self.jitter, self.seed)]
        if not Path(self.path).is_file():
            raise ConfigError(f"mesh file not found: {self.path}")
        return [read_mesh(self.path)]

    def finest(self) -> QuadMesh:
        return self.sequence()[-1]


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "convergence"
    mesh: MeshSpec = field(default_factory=lambda: MeshSpec.parse(DEFAULT_MESH["convergence"]))
    E: float = 180e9
    nu: float = 0.3
    thickness: tuple[float, ...] = (1e-2,)
    k_shear: float = 5.0 / 6.0
    gamma: float = 10.0
    variant: RotationVariant = RotationVariant.COVARIANT
    out: str | None = None
    zero_load: bool = False
    dump: str | None = None

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.E <= 0 or not -1.0 < self.nu < 0.5:
            raise ConfigError("need E > 0 and -1 < nu < 0.5")
        if self.k_shear <= 0 or self.gamma <= 0:
            raise ConfigError("shear correction and gamma must be positive")
        if not self.thickness or any(t <= 0 for t in self.thickness):
            raise ConfigError("thickness values must be positive")
        if self.mesh.pattern not in TRAPEZOID_PATTERNS:
            raise ConfigError(f"unknown trapezoid pattern {self.mesh.pattern!r}")
        if self.mesh.kind == "trapezoid" and (
            self.mesh.levels < 1 or not 0.0 <= self.mesh.distortion < 0.45
        ):
            raise ConfigError("trapezoid mesh needs levels >= 1 and distortion in [0, 0.45)")
        if self.mesh.kind == "perturbed" and (self.mesh.n < 1 or not 0.0 <= self.mesh.jitter <= 0.3):
            raise ConfigError("perturbed mesh needs n >= 1 and jitter in [0, 0.3]")
        if self.experiment == "convergence" and self.mesh.kind != "trapezoid":
            raise ConfigError("convergence runs need a trapezoid mesh sequence")
        return self


# config-file keys and flag names mapped to RunConfig fields
_ALIASES = {
    "shear_correction": "k_shear",
    "shear-correction": "k_shear",
    "k": "k_shear",
    "t": "thickness",
    "zero-load": "zero_load",
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_thickness(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad thickness list {text!r}") from exc


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{num}: expected key=value")
        values[key.strip()] = value.strip()
    return values


def build_config(values: dict) -> RunConfig:
    """RunConfig from string or typed values; unknown keys are config errors.

    Mesh fields (levels, distortion, pattern, seed, n, jitter) override the
    corresponding fields of the mesh spec.
    """
    values = {_ALIASES.get(k, k): v for k, v in values.items() if v is not None}
    experiment = str(values.pop("experiment", "convergence"))
    mesh_text = values.pop("mesh", DEFAULT_MESH.get(experiment, DEFAULT_MESH["convergence"]))
    mesh = mesh_text if isinstance(mesh_text, MeshSpec) else MeshSpec.parse(str(mesh_text))
    mesh_over = {}
    try:
        for key, conv in (("levels", int), ("distortion", float), ("pattern", str),
                          ("seed", int), ("n", int), ("jitter", float)):
            if key in values:
                mesh_over[key] = conv(values.pop(key))
        kw: dict = {}
        for key, conv in (("E", float), ("nu", float), ("k_shear", float), ("gamma", float)):
            if key in values:
                kw[key] = conv(values.pop(key))
        if "thickness" in values:
            t = values.pop("thickness")
            kw["thickness"] = parse_thickness(t) if isinstance(t, str) else tuple(float(v) for v in t)
        elif experiment == "locking":
            kw["thickness"] = DEFAULT_SWEEP
        if "variant" in values:
            kw["variant"] = RotationVariant(str(values.pop("variant")))
        if "zero_load" in values:
            z = values.pop("zero_load")
            kw["zero_load"] = _parse_bool(z) if isinstance(z, str) else bool(z)
        for key in ("out", "dump"):
            if key in values:
                kw[key] = str(values.pop(key))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if values:
        raise ConfigError(f"unknown configuration keys: {', '.join(sorted(values))}")
    mesh = dataclasses.replace(mesh, **mesh_over)
    return RunConfig(experiment=experiment, mesh=mesh, **kw).validate()
