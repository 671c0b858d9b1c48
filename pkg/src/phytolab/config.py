"""INI configuration: one file describes a whole bench run.

Sections:
  [system]        seed, period, stimulation interval, run length, output dir
  [channels]      name = kind pairs; omit for the full default inventory
  [tissue]        cell parameters rs / rp / cp
  [biopotential]  baseline, noise and event shapes for the simulator
  [impedance]     excitation frequency, amplitude, buffer, rate, gain, noise
  [pipe]          tier capacities and hand-off strides
  [detector.ID]   kind = ... plus that detector's parameters
  [actuator.ID]   kind = relay | rgb_led | electrical_stimulation |
                  message_to_file | message_to_ip | generic_sink
  [binding.ID]    expression, actuator, payload, cooldown, homeostat knobs
  [events]        scripted stimuli: touch / wound = t_seconds[:channel], ...
  [sweep]         frequency sweep plan for the sweep command
  [store]         segment and capacity sizes for the record stores

Everything has a default; an empty file is a valid bench.  Unknown sections,
detector kinds, channels or detector references fail at load time, not at
runtime.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

from .actuation import (
    Actuator,
    Binding,
    ElectricalStimulation,
    GenericSink,
    HomeostatConfig,
    MessageToFile,
    MessageToIp,
    Relay,
    RgbLed,
    parse_expression,
)
from .channels import (
    MAX_PERIOD_S,
    MIN_PERIOD_S,
    ChannelId,
    ChannelKind,
    default_channels,
    validate_unique_names,
)
from .detectors import DETECTOR_KINDS, Detector, build_detector
from .fra import SweepSpec
from .logstore import CAPACITY_BYTES, SEGMENT_BYTES
from .pipes import LONG, MIDDLE, SHORT, TierLayout
from .simulator import Event, EventKind, SimParams, TissueModel

_KIND_BY_VALUE = {k.value: k for k in ChannelKind}


class ConfigError(ValueError):
    """Rejected bench configuration."""


@dataclass(frozen=True)
class StoreParams:
    segment_bytes: int = SEGMENT_BYTES
    capacity_bytes: int = CAPACITY_BYTES


@dataclass(frozen=True)
class ActuatorSpec:
    """Deferred actuator construction: file paths resolve against the run
    dir and electrical stimulation binds to the run's simulator."""

    id: str
    kind: str
    path: str = ""
    host: str = ""
    port: int = 0
    intensity: float = 1.0

    def build(self, out_dir: Path, simulator=None) -> Actuator:
        if self.kind == "message_to_file":
            return MessageToFile(self.id, str(out_dir / self.path))
        if self.kind == "message_to_ip":
            return MessageToIp(self.id, self.host, self.port)
        if self.kind == "relay":
            return Relay(self.id)
        if self.kind == "rgb_led":
            return RgbLed(self.id)
        if self.kind == "electrical_stimulation":
            return ElectricalStimulation(
                self.id, intensity=self.intensity, target=simulator
            )
        if self.kind == "generic_sink":
            return GenericSink(self.id)
        raise ConfigError(f"unknown actuator kind {self.kind!r}")


@dataclass(frozen=True)
class BindingSpec:
    id: str
    expression: str
    actuator: str
    payload: str = "fired"
    cooldown_s: float = 0.0
    homeostat_target_per_hour: float = 0.0
    homeostat_alpha: float = 0.05
    homeostat_step: float = 1.05
    homeostat_lo: float = 0.1
    homeostat_hi: float = 10.0


@dataclass(frozen=True)
class BenchConfig:
    """Validated, fully-typed bench description."""

    seed: int = 42
    period_s: float = 1.0
    stimulation_interval_s: float = 10.0
    duration_s: float = 600.0
    log_dir: str = "bench_run"
    report: str = ""
    channels: tuple[ChannelId, ...] = field(default_factory=default_channels)
    tissue: TissueModel = field(default_factory=TissueModel)
    sim_params: SimParams = field(default_factory=SimParams)
    tier_layout: TierLayout = field(default_factory=TierLayout)
    detectors: tuple[Detector, ...] = ()
    actuator_specs: tuple[ActuatorSpec, ...] = ()
    binding_specs: tuple[BindingSpec, ...] = ()
    events: tuple[Event, ...] = ()
    sweep: SweepSpec = field(default_factory=SweepSpec)
    store: StoreParams = field(default_factory=StoreParams)

    def build_bindings(
        self, out_dir: Path, simulator=None
    ) -> tuple[list[Binding], dict[str, Actuator]]:
        """Materialize actuators in out_dir and wire the bindings to them."""
        actuators = {
            spec.id: spec.build(out_dir, simulator) for spec in self.actuator_specs
        }
        detector_ids = frozenset(d.id for d in self.detectors)
        bindings = []
        for spec in self.binding_specs:
            per_cycle = spec.homeostat_target_per_hour * self.period_s / 3600.0
            binding = Binding(
                id=spec.id,
                expression=parse_expression(spec.expression),
                actuator=actuators[spec.actuator],
                payload=spec.payload,
                cooldown_s=spec.cooldown_s,
                homeostat=HomeostatConfig(
                    target_per_cycle=per_cycle,
                    alpha=spec.homeostat_alpha,
                    step=spec.homeostat_step,
                    lo=spec.homeostat_lo,
                    hi=spec.homeostat_hi,
                ),
            )
            binding.validate_against(detector_ids)
            bindings.append(binding)
        return bindings, actuators


_KNOWN_SECTIONS = {
    "system",
    "channels",
    "tissue",
    "biopotential",
    "impedance",
    "pipe",
    "events",
    "sweep",
    "store",
}

_FIELD_TYPES = {"int": int, "float": float, "str": str}


def _coerce_params(cls: type, raw: dict[str, str], where: str) -> dict:
    by_name = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for key, text in raw.items():
        f = by_name.get(key)
        if f is None:
            raise ConfigError(f"{where}: unknown parameter {key!r}")
        base = str(f.type).split("|")[0].strip()
        conv = _FIELD_TYPES.get(base, str)
        try:
            out[key] = conv(text)
        except ValueError:
            raise ConfigError(f"{where}: {key} = {text!r} is not a valid {base}")
    return out


def _get_typed(section, key: str, conv, default, where: str):
    if key not in section:
        return default
    try:
        return conv(section[key])
    except ValueError:
        raise ConfigError(f"{where}: {key} = {section[key]!r} is not a {conv.__name__}")


def _parse_channels(section) -> tuple[ChannelId, ...]:
    chans = []
    for name, kind_text in section.items():
        kind = _KIND_BY_VALUE.get(kind_text.strip())
        if kind is None:
            raise ConfigError(
                f"[channels]: unknown kind {kind_text!r} for {name!r}; "
                f"expected one of {sorted(_KIND_BY_VALUE)}"
            )
        chans.append(ChannelId(name=name, kind=kind))
    try:
        validate_unique_names(chans)
    except ValueError as exc:
        raise ConfigError(f"[channels]: {exc}") from None
    return tuple(chans)


def _parse_events(section, channel_names: set[str]) -> tuple[Event, ...]:
    events = []
    for kind_text, listing in section.items():
        try:
            kind = EventKind(kind_text)
        except ValueError:
            raise ConfigError(f"[events]: unknown event kind {kind_text!r}")
        for item in listing.split(","):
            item = item.strip()
            if not item:
                continue
            channel = None
            if ":" in item:
                item, channel = item.split(":", 1)
                channel = channel.strip()
                if channel not in channel_names:
                    raise ConfigError(f"[events]: unknown channel {channel!r}")
            try:
                at_s = float(item)
            except ValueError:
                raise ConfigError(f"[events]: bad timestamp {item!r}")
            try:
                events.append(
                    Event(kind=kind, at_ms=round(at_s * 1000.0), channel=channel)
                )
            except ValueError as exc:
                raise ConfigError(f"[events]: {exc}") from None
    return tuple(sorted(events, key=lambda e: e.at_ms))


def parse_config(text: str) -> BenchConfig:
    """Parse and validate a bench configuration from INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep channel and parameter names case-exact
    try:
        parser.read_file(io.StringIO(text))
    except configparser.Error as exc:
        raise ConfigError(f"malformed INI: {exc}") from None

    for name in parser.sections():
        head = name.split(".", 1)[0]
        if head in ("detector", "actuator", "binding"):
            if "." not in name or not name.split(".", 1)[1]:
                raise ConfigError(f"section [{name}] needs an id: [{head}.some_id]")
            continue
        if name not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown section [{name}]")

    system = parser["system"] if parser.has_section("system") else {}
    seed = _get_typed(system, "seed", int, 42, "[system]")
    period_s = _get_typed(system, "period_s", float, 1.0, "[system]")
    if not (MIN_PERIOD_S <= period_s <= MAX_PERIOD_S):
        raise ConfigError(
            f"[system]: period_s {period_s} outside [{MIN_PERIOD_S}, {MAX_PERIOD_S}]"
        )
    stim_s = _get_typed(system, "stimulation_interval_s", float, 10.0, "[system]")
    duration_s = _get_typed(system, "duration_s", float, 600.0, "[system]")
    log_dir = system.get("log_dir", "bench_run") if system else "bench_run"
    report = system.get("report", "") if system else ""

    if parser.has_section("channels") and parser.options("channels"):
        channels = _parse_channels(parser["channels"])
    else:
        channels = default_channels()
    channel_names = {c.name for c in channels}

    tissue_raw = dict(parser["tissue"]) if parser.has_section("tissue") else {}
    tissue_kwargs = _coerce_params(TissueModel, tissue_raw, "[tissue]")
    try:
        tissue = TissueModel(**tissue_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[tissue]: {exc}") from None

    sim_kwargs: dict = {}
    if parser.has_section("biopotential"):
        alias = {
            "baseline_v": "bio_baseline_v",
            "noise_rms_v": "bio_noise_rms_v",
            "blank_during_stimulation": "blank_bio_during_stimulation",
        }
        for key, text_v in parser["biopotential"].items():
            sim_kwargs[alias.get(key, key)] = text_v
    if parser.has_section("impedance"):
        alias = {
            "frequency_hz": "excitation_hz",
            "amplitude_v": "excitation_amplitude_v",
            "samples": "excitation_samples",
            "sample_rate_hz": "excitation_rate_hz",
            "gain": "transimpedance_gain",
            "noise_rms_v": "impedance_noise_rms_v",
        }
        for key, text_v in parser["impedance"].items():
            mapped = alias.get(key)
            if mapped is None:
                raise ConfigError(f"[impedance]: unknown parameter {key!r}")
            sim_kwargs[mapped] = text_v
    sim_kwargs["stimulation_interval_s"] = repr(stim_s)
    typed = _coerce_params(SimParams, sim_kwargs, "[biopotential]/[impedance]")
    try:
        sim_params = SimParams(**typed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    pipe_raw = dict(parser["pipe"]) if parser.has_section("pipe") else {}
    pipe_kwargs = _coerce_params(TierLayout, pipe_raw, "[pipe]")
    try:
        tier_layout = TierLayout(**pipe_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[pipe]: {exc}") from None

    detectors = []
    for name in parser.sections():
        if not name.startswith("detector."):
            continue
        det_id = name.split(".", 1)[1]
        raw = dict(parser[name])
        if "id" in raw:
            raise ConfigError(f"[{name}]: id comes from the section name")
        kind = raw.pop("kind", None)
        if kind is None:
            raise ConfigError(f"[{name}] needs kind = <detector kind>")
        if kind not in DETECTOR_KINDS:
            raise ConfigError(
                f"[{name}]: unknown kind {kind!r}, expected one of "
                f"{sorted(DETECTOR_KINDS)}"
            )
        params = _coerce_params(DETECTOR_KINDS[kind], raw, f"[{name}]")
        chan = params.get("channel")
        if chan is not None and chan not in channel_names:
            raise ConfigError(f"[{name}]: unknown channel {chan!r}")
        tier = params.get("tier")
        if tier is not None and tier not in (SHORT, MIDDLE, LONG):
            raise ConfigError(f"[{name}]: unknown tier {tier!r}")
        try:
            detectors.append(build_detector(kind, id=det_id, **params))
        except ValueError as exc:
            raise ConfigError(f"[{name}]: {exc}") from None

    actuator_specs = []
    for name in parser.sections():
        if not name.startswith("actuator."):
            continue
        act_id = name.split(".", 1)[1]
        raw = dict(parser[name])
        if "id" in raw:
            raise ConfigError(f"[{name}]: id comes from the section name")
        kind = raw.pop("kind", None)
        if kind not in (
            "message_to_file",
            "message_to_ip",
            "relay",
            "rgb_led",
            "electrical_stimulation",
            "generic_sink",
        ):
            raise ConfigError(f"[{name}]: unknown actuator kind {kind!r}")
        spec_kwargs = _coerce_params(ActuatorSpec, raw, f"[{name}]")
        if kind == "message_to_file" and not spec_kwargs.get("path"):
            raise ConfigError(f"[{name}]: message_to_file needs path")
        if kind == "message_to_ip":
            if not spec_kwargs.get("host") or not spec_kwargs.get("port"):
                raise ConfigError(f"[{name}]: message_to_ip needs host and port")
        actuator_specs.append(ActuatorSpec(id=act_id, kind=kind, **spec_kwargs))
    actuator_ids = {a.id for a in actuator_specs}

    binding_specs = []
    detector_ids = frozenset(d.id for d in detectors)
    for name in parser.sections():
        if not name.startswith("binding."):
            continue
        b_id = name.split(".", 1)[1]
        raw = dict(parser[name])
        if "id" in raw:
            raise ConfigError(f"[{name}]: id comes from the section name")
        if "expression" not in raw or "actuator" not in raw:
            raise ConfigError(f"[{name}] needs expression and actuator")
        spec = BindingSpec(id=b_id, **_coerce_params(BindingSpec, raw, f"[{name}]"))
        if spec.actuator not in actuator_ids:
            raise ConfigError(f"[{name}]: unknown actuator {spec.actuator!r}")
        binding_specs.append(spec)

    events = ()
    if parser.has_section("events"):
        events = _parse_events(parser["events"], channel_names)

    sweep_raw = dict(parser["sweep"]) if parser.has_section("sweep") else {}
    alias = {"amplitude_v": "amplitude", "samples": "n_samples"}
    sweep_raw = {alias.get(k, k): v for k, v in sweep_raw.items()}
    sweep_kwargs = _coerce_params(SweepSpec, sweep_raw, "[sweep]")
    try:
        sweep = SweepSpec(**sweep_kwargs)
    except ValueError as exc:
        raise ConfigError(f"[sweep]: {exc}") from None

    store_raw = dict(parser["store"]) if parser.has_section("store") else {}
    store = StoreParams(**_coerce_params(StoreParams, store_raw, "[store]"))

    config = BenchConfig(
        seed=seed,
        period_s=period_s,
        stimulation_interval_s=stim_s,
        duration_s=duration_s,
        log_dir=log_dir,
        report=report,
        channels=channels,
        tissue=tissue,
        sim_params=sim_params,
        tier_layout=tier_layout,
        detectors=tuple(detectors),
        actuator_specs=tuple(actuator_specs),
        binding_specs=tuple(binding_specs),
        events=events,
        sweep=sweep,
        store=store,
    )
    # fail fast on expression or reference errors, then throw the build away
    try:
        config.build_bindings(Path("."))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return config


def load_config(path: str | Path) -> BenchConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)
