"""Flat ``key = value`` files used for schemas and experiment configs."""

from .errors import ConfigInvalid


def parse_kv(text, source="<string>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigInvalid(f"{source}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def read_kv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read(), source=str(path))


def write_kv(path, mapping):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in mapping.items():
            fh.write(f"{key} = {value}\n")


def as_bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ConfigInvalid(f"not a boolean: {value!r}")


def as_list(value):
    if isinstance(value, (list, tuple)):
        return list(value)
    return [v.strip() for v in str(value).split(",") if v.strip()]
