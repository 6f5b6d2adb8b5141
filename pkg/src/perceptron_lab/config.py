"""Fail-closed run configuration.

Config files are flat `key = value` lines plus at most one `model { ... }`
block holding the activation and disorder. Full-line comments start with #.
Every subcommand has a schema: unknown keys, missing required keys, duplicate
keys, and type errors all raise ConfigError with the offending key and line.
Command-line overrides pass through the same schema.
"""

from __future__ import annotations

from dataclasses import dataclass

from .activation import Activation, parse_activation
from .disorder import DisorderSpec, parse_disorder
from .errors import ConfigError
from .separation import BlockDecomposition

__all__ = ["RunConfig", "parse_config", "resolve_config", "SCHEMAS", "MODEL_KEYS"]

REQUIRED = object()


@dataclass(frozen=True)
class KeySpec:
    kind: str  # int, float, str, ints, floats, grid, int?, float?
    default: object
    doc: str


def _k(kind: str, default, doc: str) -> KeySpec:
    return KeySpec(kind, default, doc)


_SEED = _k("int", REQUIRED, "master seed; no wall-clock seeding")
_DELTA = _k("float", 0.05, "truncation level delta")
_OUT = _k("str", None, "output directory (default runs/<subcommand>)")

SCHEMAS: dict[str, dict[str, KeySpec]] = {
    "enumerate": {
        "n": _k("int", REQUIRED, "dimension"),
        "m": _k("int?", None, "constraint count (or give alpha)"),
        "alpha": _k("float?", None, "constraint density; M = round(N alpha)"),
        "delta": _DELTA,
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "separation": {
        "n": _k("int", REQUIRED, "dimension"),
        "l": _k("int", REQUIRED, "block count L; K*L=N required"),
        "eps": _k("float", 0.25, "separation level"),
        "gamma": _k("float", 0.25, "certified block fraction"),
        "delta": _DELTA,
        "source": _k("str", "cube", "configuration source: cube or solutions"),
        "alpha": _k("float?", None, "constraint density when source = solutions"),
        "n_tuple": _k("int?", None, "sampled tuple size (default: pipeline choice)"),
        "eta_min": _k("float", 0.05, "lower clamp for the greedy threshold eta"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "verify.addone": {
        "n": _k("int", REQUIRED, "dimension"),
        "m": _k("int?", None, "constraint count (or give alpha)"),
        "alpha": _k("float?", None, "constraint density; M = round(N alpha)"),
        "delta": _DELTA,
        "w_grid": _k("grid", (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0), "tail levels w"),
        "replicates": _k("int", 200, "conditioned replicate count"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "verify.allfail": {
        "eps_grid": _k("floats", (0.25, 0.5, 1.0), "correlation levels"),
        "n_grid": _k("ints", (16, 256, 4096), "process sizes"),
        "replicates": _k("int", 10000, "Monte Carlo replicates per grid point"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "verify.sup": {
        "n": _k("int", REQUIRED, "dimension"),
        "source": _k("str", "cube", "configuration source: cube or solutions"),
        "alpha": _k("float?", None, "constraint density when source = solutions"),
        "eps": _k("float", 1.0, "caller-certified pairwise separation level of S"),
        "u_grid": _k("floats", (0.25, 0.5, 0.75, 1.0, 1.5, 2.0), "deviation levels"),
        "replicates": _k("int", 2000, "Monte Carlo replicates"),
        "delta": _DELTA,
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "verify.clt": {
        "n": _k("int", REQUIRED, "dimension"),
        "p": _k("int", 1, "constraint-tuple size"),
        "replicates": _k("int", 20000, "paired replicates"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "threshold": {
        "n": _k("int", REQUIRED, "dimension"),
        "alpha_grid": _k("grid", REQUIRED, "alpha grid, a:step:b or comma list"),
        "replicates": _k("int", 200, "replicates per grid point"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "concentration": {
        "n_list": _k("ints", REQUIRED, "dimensions to scan"),
        "alpha": _k("float", REQUIRED, "constraint density"),
        "delta": _DELTA,
        "replicates": _k("int", 200, "replicates per dimension"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "universality": {
        "disorders": _k("str", REQUIRED, "semicolon-separated disorder list"),
        "n": _k("int", REQUIRED, "dimension"),
        "alpha": _k("float", REQUIRED, "constraint density"),
        "delta": _DELTA,
        "replicates": _k("int", 200, "replicates per disorder"),
        "slack": _k("float", 0.5, "margin slack numerator; margin adds slack/sqrt(n)"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "slowdec": {
        "n": _k("int", REQUIRED, "dimension"),
        "m": _k("int", REQUIRED, "base constraint count"),
        "rho": _k("float", REQUIRED, "additional density; extra rows = round(N rho)"),
        "delta": _DELTA,
        "replicates": _k("int", 200, "conditioned replicate count"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
    "tempgap": {
        "n": _k("int", REQUIRED, "dimension"),
        "alpha": _k("float", REQUIRED, "constraint density"),
        "a_list": _k("floats", (1.0, 2.0, 5.0, 10.0, 20.0, 50.0), "truncation levels A"),
        "delta": _DELTA,
        "replicates": _k("int", 100, "replicates"),
        "seed": _SEED,
        "output_dir": _OUT,
    },
}

# which model-block keys each subcommand accepts; True = required
MODEL_KEYS: dict[str, dict[str, bool]] = {
    "enumerate": {"activation": True, "disorder": True},
    "separation": {"activation": False, "disorder": False},
    "verify.addone": {"activation": True, "disorder": True},
    "verify.allfail": {},
    "verify.sup": {"disorder": True, "activation": False},
    "verify.clt": {"activation": True, "disorder": True},
    "threshold": {"activation": True, "disorder": True},
    "concentration": {"activation": True, "disorder": True},
    "universality": {"activation": True},
    "slowdec": {"activation": True, "disorder": True},
    "tempgap": {"activation": True, "disorder": True},
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict
    activation: Activation | None
    disorder: DisorderSpec | None
    disorders: tuple[DisorderSpec, ...] | None

    def echo(self) -> dict:
        """Fully resolved, manifest-ready view of the configuration."""
        out = {"subcommand": self.subcommand}
        for key, val in sorted(self.values.items()):
            if isinstance(val, tuple):
                out[key] = ",".join(str(v) for v in val)
            else:
                out[key] = val if val is None or isinstance(val, (int, float)) else str(val)
        from .activation import format_activation
        from .disorder import format_disorder

        if self.activation is not None:
            out["model.activation"] = format_activation(self.activation)
        if self.disorder is not None:
            out["model.disorder"] = format_disorder(self.disorder)
        if self.disorders is not None:
            out["disorders"] = ";".join(format_disorder(s) for s in self.disorders)
        return out


def _parse_number_list(text: str, cast, key: str, line: int):
    try:
        return tuple(cast(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"key '{key}' (line {line}): {exc}") from exc


def _parse_grid(text: str, key: str, line: int) -> tuple[float, ...]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"key '{key}' (line {line}): grid must be start:step:stop, got '{text}'")
        try:
            start, step, stop = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"key '{key}' (line {line}): {exc}") from exc
        if step <= 0 or stop < start:
            raise ConfigError(f"key '{key}' (line {line}): need step > 0 and stop >= start")
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    return _parse_number_list(text, float, key, line)


def _typed(key: str, raw: str, spec: KeySpec, line: int):
    kind = spec.kind
    try:
        if kind in ("int", "int?"):
            return int(raw)
        if kind in ("float", "float?"):
            return float(raw)
        if kind == "str":
            return raw
        if kind == "ints":
            return _parse_number_list(raw, int, key, line)
        if kind == "floats":
            return _parse_number_list(raw, float, key, line)
        if kind == "grid":
            return _parse_grid(raw, key, line)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"key '{key}' (line {line}): {exc}") from exc
    raise ConfigError(f"key '{key}': unhandled kind {kind}")


def _read_lines(path: str):
    """(flat, model) dicts of key -> (raw value, line number)."""
    flat: dict[str, tuple[str, int]] = {}
    model: dict[str, tuple[str, int]] = {}
    in_model = False
    seen_model = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw_line in enumerate(fh, start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if line == "model {":
                if seen_model:
                    raise ConfigError(f"duplicate model block (line {lineno})")
                if in_model:
                    raise ConfigError(f"nested model block (line {lineno})")
                in_model = seen_model = True
                continue
            if line == "}":
                if not in_model:
                    raise ConfigError(f"unmatched closing brace (line {lineno})")
                in_model = False
                continue
            if "=" not in line:
                raise ConfigError(f"expected key = value (line {lineno}): '{line}'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            target = model if in_model else flat
            if key in target:
                raise ConfigError(f"duplicate key '{key}' (line {lineno})")
            target[key] = (value, lineno)
    if in_model:
        raise ConfigError("unterminated model block")
    return flat, model


def resolve_config(subcommand: str, flat: dict, model: dict) -> RunConfig:
    """Validate raw string maps against the subcommand schema."""
    if subcommand not in SCHEMAS:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    schema = SCHEMAS[subcommand]
    model_schema = MODEL_KEYS[subcommand]

    for key, (_, line) in flat.items():
        if key not in schema:
            raise ConfigError(f"unknown key '{key}' (line {line}) for subcommand {subcommand}")
    for key, (_, line) in model.items():
        if key not in model_schema:
            raise ConfigError(f"unknown model key '{key}' (line {line}) for subcommand {subcommand}")

    values: dict = {}
    for key, spec in schema.items():
        if key in flat:
            values[key] = _typed(key, flat[key][0], spec, flat[key][1])
        elif spec.default is REQUIRED:
            raise ConfigError(f"missing required key '{key}' for subcommand {subcommand}")
        else:
            values[key] = spec.default
    if values.get("output_dir") is None and "output_dir" in schema:
        values["output_dir"] = "runs/" + subcommand.replace(".", "_")

    activation = disorder = None
    for key, required in model_schema.items():
        if key in model:
            raw, line = model[key]
            try:
                if key == "activation":
                    activation = parse_activation(raw)
                else:
                    disorder = parse_disorder(raw)
            except ValueError as exc:
                raise ConfigError(f"model key '{key}' (line {line}): {exc}") from exc
        elif required:
            raise ConfigError(f"missing required model key '{key}' for subcommand {subcommand}")

    disorders = None
    if "disorders" in values and values["disorders"] is not None:
        try:
            disorders = tuple(
                parse_disorder(part.strip()) for part in str(values["disorders"]).split(";") if part.strip()
            )
        except ValueError as exc:
            raise ConfigError(f"key 'disorders': {exc}") from exc
        if len(disorders) < 2:
            raise ConfigError("key 'disorders': need at least two disorder specs")

    _cross_validate(subcommand, values, activation, disorder)
    return RunConfig(subcommand, values, activation, disorder, disorders)


def _cross_validate(subcommand: str, values: dict, activation, disorder) -> None:
    if subcommand in ("enumerate", "verify.addone"):
        if (values["m"] is None) == (values["alpha"] is None):
            raise ConfigError(f"{subcommand}: exactly one of m / alpha must be set")
    if subcommand == "separation":
        try:
            BlockDecomposition(values["n"], values["l"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if values["source"] not in ("cube", "solutions"):
            raise ConfigError(f"separation: source must be cube or solutions, got '{values['source']}'")
        if values["source"] == "solutions":
            if activation is None or disorder is None:
                raise ConfigError("separation: source = solutions needs a model block")
            if values["alpha"] is None:
                raise ConfigError("separation: source = solutions needs alpha")
    if subcommand == "verify.sup":
        if values["source"] not in ("cube", "solutions"):
            raise ConfigError(f"verify.sup: source must be cube or solutions, got '{values['source']}'")
        if values["source"] == "solutions" and (values["alpha"] is None or activation is None):
            raise ConfigError("verify.sup: source = solutions needs alpha and a model activation")


def parse_config(subcommand: str, path: str | None, overrides: dict[str, str]) -> RunConfig:
    """Read the optional file, apply command-line overrides, validate.

    Overrides use flat key names; 'activation' and 'disorder' route into the
    model block."""
    if path is None:
        flat, model = {}, {}
    else:
        try:
            flat, model = _read_lines(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config file '{path}': {exc}") from exc
    for key, raw in overrides.items():
        if raw is None:
            continue
        if key in ("activation", "disorder"):
            model[key] = (raw, 0)
        else:
            flat[key] = (raw, 0)
    return resolve_config(subcommand, flat, model)
