"""JSON pulse documents: parse, validate and serialize.

Numbers travel as decimal strings written with ``repr(float)``, so a
document read back and re-serialized is identical to the original.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from pydantic import ValidationError

from armd.exceptions import InvalidInputError, PulseFileError
from armd.model import GateConfiguration, default_wiring
from armd.pulse import DEFAULT_TAU_US, PulseSet, Waveform, WaveformKind
from armd.schemas import (
    SCHEMA_VERSION, BlockadeSpec, ProblemDocument, PulseDocument, PulseSpec, decimal,
)


DocumentT = TypeVar("DocumentT", bound=PulseDocument)


def _field_line(text: str, key: str) -> Optional[int]:
    """First line of ``text`` mentioning ``"key"``."""
    needle = f'"{key}"'
    for number, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return number
    return None


def _from_validation_error(exc: ValidationError, text: str) -> PulseFileError:
    first = exc.errors()[0]
    loc = tuple(first.get("loc", ()))
    field = ".".join(str(part) for part in loc) if loc else None
    line = None
    for key in reversed([part for part in loc if isinstance(part, str)]):
        line = _field_line(text, key)
        if line is not None:
            break
    message = "field required" if first["type"] == "missing" else first["msg"]
    return PulseFileError(message, field=field, line=line)


def _load_json(text: str) -> Dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PulseFileError(exc.msg, line=exc.lineno)
    if not isinstance(data, dict):
        raise PulseFileError("document must be a JSON object", line=1)
    return data


def load_document(text: str, model: Type[DocumentT] = PulseDocument) -> DocumentT:
    """Validate ``text`` against a document model."""
    data = _load_json(text)
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise _from_validation_error(exc, text)


def document_to_domain(document: PulseDocument, text: str = "") -> Tuple[GateConfiguration, PulseSet]:
    """Build the configuration and pulses described by a validated document."""
    tau_us = float(document.tau_us)
    pulses: PulseSet = {}
    for name, spec in document.pulses.items():
        if spec.kind == WaveformKind.MODULATED:
            pulses[name] = Waveform.modulated([float(a) for a in spec.coefficients], tau_us)
        else:
            pulses[name] = Waveform.constant(float(spec.constant_2pi_MHz), tau_us)

    wiring = document.wiring if document.wiring is not None else default_wiring(document.scheme)
    for role, name in wiring.items():
        if name not in pulses:
            field = "wiring" if document.wiring is not None else "pulses"
            raise PulseFileError(
                f"role '{role}' needs pulse '{name}', which the document does not define",
                field=field,
                line=_field_line(text, field),
            )

    blockade = None
    if isinstance(document.blockade, BlockadeSpec):
        blockade = float(document.blockade.b_2pi_MHz)

    try:
        config = GateConfiguration(
            scheme=document.scheme,
            duration_us=float(document.duration_us),
            delta_2pi_mhz=None if document.delta_2pi_MHz is None else float(document.delta_2pi_MHz),
            blockade_2pi_mhz=blockade,
            rydberg_detuning_2pi_mhz=float(document.rydberg_detuning_2pi_MHz or 0.0),
            pulse_wiring=dict(wiring),
        )
    except ValidationError as exc:
        raise _from_validation_error(exc, text)
    return config, pulses


def parse_pulse_file(text: str) -> Tuple[GateConfiguration, PulseSet]:
    """Configuration and pulses from pulse-document text."""
    return document_to_domain(load_document(text), text)


def parse_problem_file(text: str) -> Tuple[ProblemDocument, GateConfiguration, PulseSet]:
    """Problem document together with the configuration and pulses it embeds."""
    document = load_document(text, ProblemDocument)
    config, pulses = document_to_domain(document, text)
    return document, config, pulses


def pulse_document(config: GateConfiguration, pulses: PulseSet) -> PulseDocument:
    """Document model for a configuration and its pulses."""
    modulated = [w for w in pulses.values() if w.kind == WaveformKind.MODULATED]
    harmonics = {w.n_harmonics for w in modulated}
    if len(harmonics) > 1:
        raise InvalidInputError(f"modulated pulses disagree on n_harmonics: {sorted(harmonics)}")
    taus = {w.tau_us for w in pulses.values()}
    if len(taus) > 1:
        raise InvalidInputError(f"pulses disagree on tau: {sorted(taus)}")

    specs = {}
    for name, w in pulses.items():
        if w.kind == WaveformKind.MODULATED:
            specs[name] = PulseSpec(kind=w.kind, coefficients=[decimal(a) for a in w.coefficients])
        else:
            specs[name] = PulseSpec(kind=w.kind, constant_2pi_MHz=decimal(w.constant_2pi_mhz))

    blockade: Union[str, BlockadeSpec] = "infinite"
    if not config.infinite_blockade:
        blockade = BlockadeSpec(b_2pi_MHz=decimal(config.blockade_2pi_mhz))

    wiring = None
    if config.pulse_wiring != default_wiring(config.scheme):
        wiring = dict(config.pulse_wiring)

    return PulseDocument(
        schema_version=SCHEMA_VERSION,
        scheme=config.scheme,
        tau_us=decimal(taus.pop() if taus else DEFAULT_TAU_US),
        duration_us=decimal(config.duration_us),
        n_harmonics=harmonics.pop() if harmonics else 0,
        delta_2pi_MHz=None if config.delta_2pi_mhz is None else decimal(config.delta_2pi_mhz),
        rydberg_detuning_2pi_MHz=(
            decimal(config.rydberg_detuning_2pi_mhz) if config.rydberg_detuning_2pi_mhz else None
        ),
        blockade=blockade,
        pulses=specs,
        wiring=wiring,
    )


def dump_document(document: PulseDocument) -> str:
    return document.model_dump_json(indent=2, exclude_none=True, by_alias=True) + "\n"


def serialize_pulse_file(config: GateConfiguration, pulses: PulseSet) -> str:
    """Pulse-document text for a configuration and its pulses."""
    return dump_document(pulse_document(config, pulses))


def read_pulse_file(path: Union[str, Path]) -> Tuple[GateConfiguration, PulseSet]:
    return parse_pulse_file(Path(path).read_text(encoding="utf-8"))


def write_pulse_file(path: Union[str, Path], config: GateConfiguration, pulses: PulseSet) -> Path:
    target = Path(path)
    target.write_text(serialize_pulse_file(config, pulses), encoding="utf-8")
    return target
