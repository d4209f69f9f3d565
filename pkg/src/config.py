"""
Run configuration text: flat `dotted.key = value` lines with `#` comments,
read with python-dotenv's stream parser and validated by the pydantic
models of src.schema.
"""
import io
import typing
from enum import Enum
from typing import Dict, List, Tuple

from dotenv.parser import parse_stream
from pydantic import BaseModel, ValidationError

from src.errors import ConfigParseError, ConfigValidationError
from src.schema import RunConfig
from utils.file_utils import encode_md5

_OPERATORS = {
    "greater_than": (">", "gt"),
    "greater_than_equal": (">=", "ge"),
    "less_than": ("<", "lt"),
    "less_than_equal": ("<=", "le"),
}


def _read_bindings(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for binding in parse_stream(io.StringIO(text)):
        raw = binding.original.string
        line = binding.original.line + raw[:len(raw) - len(raw.lstrip())].count("\n")
        if binding.error:
            raise ConfigParseError(f"cannot parse {raw.strip()!r}", line)
        if binding.key is None:
            continue
        if binding.value is None:
            raise ConfigParseError(f"missing value for {binding.key}", line)
        if binding.key in values:
            raise ConfigParseError(f"duplicate key {binding.key}", line)
        values[binding.key] = binding.value
    return values


def _nest(flat: Dict[str, str]) -> Dict:
    data: Dict = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = data
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigValidationError(key, f"unknown key {key}")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigValidationError(key, f"unknown key {key}")
        node[parts[-1]] = value
    return data


def _translate(error: ValidationError) -> ConfigValidationError:
    errors = sorted(error.errors(), key=lambda e: e["type"] != "extra_forbidden")
    first = errors[0]
    loc = [str(part) for part in first["loc"]]
    key = ".".join(loc)
    field = loc[-1] if loc else "config"
    if first["type"] == "extra_forbidden":
        return ConfigValidationError(key, f"unknown key {key}")
    if first["type"] in _OPERATORS:
        op, name = _OPERATORS[first["type"]]
        return ConfigValidationError(key, f"{field} must be {op} {first['ctx'][name]}")
    return ConfigValidationError(key, f"{field}: {first['msg']}")


def config_from_flat(flat: Dict[str, str]) -> RunConfig:
    """Validate a dotted-key mapping; absent keys take their documented defaults."""
    try:
        return RunConfig.model_validate(_nest(flat))
    except ValidationError as e:
        raise _translate(e) from None


def parse_config(text: str) -> RunConfig:
    return config_from_flat(_read_bindings(text))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        if not value or any(c.isspace() or c in "#'\"\\" for c in value):
            return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"
        return value
    return str(value)


def flatten_config(config: BaseModel, prefix: str = "") -> Dict[str, str]:
    """Dotted-key view of a config; unset optional values are left out."""
    flat: Dict[str, str] = {}
    for name in type(config).model_fields:
        value = getattr(config, name)
        key = f"{prefix}.{name}" if prefix else name
        if isinstance(value, BaseModel):
            flat.update(flatten_config(value, key))
        elif value is not None:
            flat[key] = _format(value)
    return flat


def serialize_config(config: RunConfig) -> str:
    lines = ["# simulate run configuration"]
    lines += [f"{key} = {value}" for key, value in flatten_config(config).items()]
    return "\n".join(lines) + "\n"


def config_fingerprint(config: RunConfig) -> str:
    return encode_md5(serialize_config(config))


def _field_keys(model: type, prefix: str = "") -> List[Tuple[str, type]]:
    keys = []
    for name, info in model.model_fields.items():
        key = f"{prefix}.{name}" if prefix else name
        annotation = info.annotation
        if isinstance(annotation, type) and issubclass(annotation, BaseModel):
            keys += _field_keys(annotation, key)
        else:
            args = [a for a in typing.get_args(annotation) if a is not type(None)]
            keys.append((key, args[0] if args else annotation))
    return keys


def numeric_keys() -> List[str]:
    """Keys a sweep may vary."""
    return [key for key, kind in _field_keys(RunConfig)
            if isinstance(kind, type) and issubclass(kind, (int, float)) and not issubclass(kind, bool)]
