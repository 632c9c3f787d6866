"""Experiment configuration files (INI sections, flat key/value pairs).

Example::

    [model]
    kind = mscale-fno
    d_v = 12
    k_max = 128
    layers = 1
    branches = 4
    scales = 1, 5, 10, 20
    seed = 0

    [train]
    learning_rate = 0.001
    batch_size = 20
    epochs = 300
    seed = 0

    [data]
    dataset = data/desk

    [output]
    dir = runs/desk-mscale
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from .fno import FnoConfig
from .mscale import SCALE_PRESETS
from .training import TrainConfig

MODEL_KINDS = ("normal-fno", "mscale-fno")

_KNOWN = {
    "model": {"kind", "d_v", "k_max", "layers", "activation", "branches", "scales", "seed", "d", "d_a", "d_u"},
    "train": {"learning_rate", "batch_size", "epochs", "seed", "beta1", "beta2", "eps"},
    "data": {"dataset", "preset", "seed", "M", "L", "counts"},
    "output": {"dir"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
        self.line = line


@dataclass
class ExperimentConfig:
    kind: str
    fno: FnoConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    n_branches: int = 1
    scales: tuple[float, ...] = ()
    model_seed: int = 0
    dataset: str | None = None
    preset: str | None = None
    data_seed: int = 0
    M: int | None = None
    L: float | None = None
    counts: tuple[int, int, int] | None = None
    output_dir: str = "runs/experiment"

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.kind == "mscale-fno" and len(self.scales) != self.n_branches:
            raise ConfigError(
                f"{len(self.scales)} scales given for {self.n_branches} branches"
            )
        if self.dataset is None and self.preset is None:
            raise ConfigError("[data] needs either 'dataset' (a path) or 'preset'")

    def to_text(self) -> str:
        f = self.fno
        lines = [
            "[model]",
            f"kind = {self.kind}",
            f"d_v = {f.d_v}",
            f"k_max = {f.k_max}",
            f"layers = {f.layers}",
            f"activation = {f.activation}",
            f"d = {f.d}",
            f"d_a = {f.d_a}",
            f"d_u = {f.d_u}",
        ]
        if self.kind == "mscale-fno":
            lines += [
                f"branches = {self.n_branches}",
                "scales = " + ", ".join(repr(float(c)) for c in self.scales),
            ]
        t = self.train
        lines += [
            f"seed = {self.model_seed}",
            "",
            "[train]",
            f"learning_rate = {t.learning_rate!r}",
            f"batch_size = {t.batch_size}",
            f"epochs = {t.epochs}",
            f"seed = {t.seed}",
            f"beta1 = {t.beta1!r}",
            f"beta2 = {t.beta2!r}",
            f"eps = {t.eps!r}",
            "",
            "[data]",
        ]
        if self.dataset is not None:
            lines.append(f"dataset = {self.dataset}")
        if self.preset is not None:
            lines.append(f"preset = {self.preset}")
            lines.append(f"seed = {self.data_seed}")
            if self.M is not None:
                lines.append(f"M = {self.M}")
            if self.L is not None:
                lines.append(f"L = {self.L!r}")
            if self.counts is not None:
                lines.append("counts = " + ", ".join(str(c) for c in self.counts))
        lines += ["", "[output]", f"dir = {self.output_dir}", ""]
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str  # keep M and L upper-case
        try:
            parser.read_string(text, source=source or "<config>")
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if exc.errors else None
            raise ConfigError(f"malformed line {exc.errors[0][1] if exc.errors else ''}", line, source) from exc
        except configparser.Error as exc:
            raise ConfigError(str(exc), getattr(exc, "lineno", None), source) from exc

        def fail(section, key, message):
            raise ConfigError(message, _line_of(text, section, key), source)

        for section in parser.sections():
            if section not in _KNOWN:
                fail(section, None, f"unknown section [{section}]")
            for key in parser[section]:
                if key not in _KNOWN[section]:
                    fail(section, key, f"unknown key {key!r} in [{section}]")
        for required in ("model", "data"):
            if required not in parser:
                raise ConfigError(f"missing section [{required}]", None, source)

        def get(section, key, conv, default=None, required=False):
            if section not in parser or key not in parser[section]:
                if required:
                    raise ConfigError(f"missing key {key!r} in [{section}]", _line_of(text, section, None), source)
                return default
            raw = parser[section][key].strip()
            try:
                return conv(raw)
            except (TypeError, ValueError) as exc:
                fail(section, key, f"bad value for {key!r}: {raw!r} ({exc})")

        kind = get("model", "kind", str, required=True)
        if kind not in MODEL_KINDS:
            fail("model", "kind", f"unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")
        activation = get("model", "activation", str, "sine" if kind == "mscale-fno" else "gelu")
        try:
            fno = FnoConfig(
                d_v=get("model", "d_v", int, required=True),
                k_max=get("model", "k_max", int, required=True),
                layers=get("model", "layers", int, 1),
                activation=activation,
                d=get("model", "d", int, 1),
                d_a=get("model", "d_a", int, 1),
                d_u=get("model", "d_u", int, 1),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), _line_of(text, "model", None), source) from exc

        n_branches, scales = 1, ()
        if kind == "mscale-fno":
            scales = get("model", "scales", _parse_scales, required=True)
            n_branches = get("model", "branches", int, len(scales))
            if len(scales) != n_branches:
                fail("model", "scales", f"{len(scales)} scales given for {n_branches} branches")

        try:
            train = TrainConfig(
                learning_rate=get("train", "learning_rate", float, 1e-3),
                batch_size=get("train", "batch_size", int, 20),
                epochs=get("train", "epochs", int, 100),
                seed=get("train", "seed", int, 0),
                beta1=get("train", "beta1", float, 0.9),
                beta2=get("train", "beta2", float, 0.999),
                eps=get("train", "eps", float, 1e-8),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), _line_of(text, "train", None), source) from exc

        dataset = get("data", "dataset", str)
        preset = get("data", "preset", str)
        if dataset is None and preset is None:
            raise ConfigError("[data] needs either 'dataset' (a path) or 'preset'", _line_of(text, "data", None), source)
        counts = get("data", "counts", _parse_counts)
        return cls(
            kind=kind,
            fno=fno,
            train=train,
            n_branches=n_branches,
            scales=tuple(scales),
            model_seed=get("model", "seed", int, 0),
            dataset=dataset,
            preset=preset,
            data_seed=get("data", "seed", int, 0),
            M=get("data", "M", int),
            L=get("data", "L", float),
            counts=counts,
            output_dir=get("output", "dir", str, "runs/experiment"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_text(path.read_text(), source=str(path))


def _parse_scales(raw: str) -> tuple[float, ...]:
    if raw in SCALE_PRESETS:
        return SCALE_PRESETS[raw]
    values = tuple(float(v) for v in raw.split(",") if v.strip())
    if not values:
        raise ValueError("empty scale list")
    return values


def _parse_counts(raw: str) -> tuple[int, int, int]:
    values = tuple(int(v) for v in raw.split(","))
    if len(values) != 3:
        raise ValueError("expected three counts: train, val, test")
    return values


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    section_line = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]", stripped)
        if m:
            current = m.group(1).strip()
            if current == section:
                section_line = lineno
            continue
        if current == section and key is not None:
            if re.match(rf"{re.escape(key)}\s*[=:]", stripped):
                return lineno
    return section_line
