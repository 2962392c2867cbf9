"""Run configuration: INI file parsing, validation and serialization.

The grammar is sectioned key-value: a ``[sim]`` and a ``[channel]``
section mirroring :class:`SimParams` / :class:`ChannelParams` field for
field, an ``[output]`` section, and one ``[scheme.<label>]`` section per
search configuration. Unknown sections or keys are hard errors so typos
cannot silently fall back to defaults. ``parse_config(serialize_config(c))``
is the identity.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import typing
from dataclasses import dataclass
from pathlib import Path

from .channel import ChannelParams
from .protocols import SchemeConfig, SearchKind, paper_schemes
from .sim import SimParams


class ConfigError(Exception):
    """Invalid configuration file or option set."""


@dataclass(frozen=True)
class RunConfig:
    sim: SimParams
    channel: ChannelParams
    schemes: tuple[SchemeConfig, ...]
    output_dir: Path = Path("results")

    def validate(self) -> None:
        try:
            self.sim.validate()
            self.channel.validate()
            if not self.schemes:
                raise ValueError("at least one scheme is required")
            labels = [s.label for s in self.schemes]
            if len(set(labels)) != len(labels):
                raise ValueError("scheme labels must be unique")
            for s in self.schemes:
                s.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def default_run_config() -> RunConfig:
    return RunConfig(sim=SimParams(), channel=ChannelParams(), schemes=paper_schemes())


def _field_types(cls) -> dict[str, type]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


_SCHEME_SKIP = ("label",)


def _coerce(name: str, raw: str, target: type):
    try:
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
        if target is SearchKind:
            return SearchKind(raw)
        if target is str:
            return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    raise ConfigError(f"unsupported config field type for {name}")


def _parse_section(parser, section: str, cls):
    types = _field_types(cls)
    kwargs = {}
    for key, raw in parser.items(section):
        if key not in types or key in _SCHEME_SKIP:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        kwargs[key] = _coerce(f"[{section}] {key}", raw, types[key])
    return kwargs


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc

    sim_kwargs: dict = {}
    channel_kwargs: dict = {}
    output_dir = Path("results")
    schemes: list[SchemeConfig] = []

    for section in parser.sections():
        if section == "sim":
            sim_kwargs = _parse_section(parser, section, SimParams)
        elif section == "channel":
            channel_kwargs = _parse_section(parser, section, ChannelParams)
        elif section == "output":
            for key, raw in parser.items(section):
                if key != "dir":
                    raise ConfigError(f"unknown key {key!r} in section [output]")
                output_dir = Path(raw)
        elif section.startswith("scheme."):
            label = section[len("scheme.") :]
            if not label:
                raise ConfigError("scheme section needs a label: [scheme.<label>]")
            kwargs = _parse_section(parser, section, SchemeConfig)
            if "kind" not in kwargs:
                raise ConfigError(f"section [{section}] is missing 'kind'")
            schemes.append(SchemeConfig(label=label, **kwargs))
        else:
            raise ConfigError(f"unknown section [{section}]")

    cfg = RunConfig(
        sim=SimParams(**sim_kwargs),
        channel=ChannelParams(**channel_kwargs),
        schemes=tuple(schemes) if schemes else paper_schemes(),
        output_dir=output_dir,
    )
    cfg.validate()
    return cfg


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def _format_value(value) -> str:
    if isinstance(value, SearchKind):
        return value.value
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["sim"] = {
        f.name: _format_value(getattr(cfg.sim, f.name)) for f in dataclasses.fields(SimParams)
    }
    parser["channel"] = {
        f.name: _format_value(getattr(cfg.channel, f.name))
        for f in dataclasses.fields(ChannelParams)
    }
    parser["output"] = {"dir": str(cfg.output_dir)}
    for scheme in cfg.schemes:
        parser[f"scheme.{scheme.label}"] = {
            f.name: _format_value(getattr(scheme, f.name))
            for f in dataclasses.fields(SchemeConfig)
            if f.name not in _SCHEME_SKIP
        }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
