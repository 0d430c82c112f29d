"""Shared pipeline configuration: defaults, flat key=value files, flags.

Precedence is defaults < config file < command-line flags. Files are one
``key = value`` per line with # comments; unknown keys are rejected with
the offending token named.
"""

from dataclasses import dataclass, fields

DEFAULTS = {
    "jump_threshold": 0.05,
    "c0": 0.005,
    "c1": 0.0025,
    "link_distance": 0.02,
    "min_cluster_points": 200,
    "merge": True,
    "frames_per_stage": 20,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs shared across the pipeline subcommands."""

    jump_threshold: float = DEFAULTS["jump_threshold"]
    c0: float = DEFAULTS["c0"]
    c1: float = DEFAULTS["c1"]
    link_distance: float = DEFAULTS["link_distance"]
    min_cluster_points: int = DEFAULTS["min_cluster_points"]
    merge: bool = DEFAULTS["merge"]
    frames_per_stage: int = DEFAULTS["frames_per_stage"]

    def __post_init__(self):
        if self.jump_threshold <= 0:
            raise ValueError(f"jump_threshold must be > 0, got {self.jump_threshold}")
        if self.c0 < 0 or self.c1 < 0 or self.c0 + self.c1 == 0:
            raise ValueError(f"need c0 >= 0, c1 >= 0, c0 + c1 > 0; got "
                             f"c0={self.c0}, c1={self.c1}")
        if self.link_distance <= 0:
            raise ValueError(f"link_distance must be > 0, got {self.link_distance}")
        if self.min_cluster_points < 1:
            raise ValueError(
                f"min_cluster_points must be >= 1, got {self.min_cluster_points}")
        if self.frames_per_stage < 1:
            raise ValueError(
                f"frames_per_stage must be >= 1, got {self.frames_per_stage}")


_BOOL_WORDS = {"on": True, "true": True, "1": True, "yes": True,
               "off": False, "false": False, "0": False, "no": False}


def _parse_bool(token: str) -> bool:
    try:
        return _BOOL_WORDS[token.strip().lower()]
    except KeyError:
        raise ValueError(f"expected on/off, got {token!r}") from None


_PARSERS = {
    "jump_threshold": float,
    "c0": float,
    "c1": float,
    "link_distance": float,
    "min_cluster_points": int,
    "merge": _parse_bool,
    "frames_per_stage": int,
}


def parse_config_text(text: str, source: str = "config") -> dict:
    """Parse flat key=value lines into a partial settings dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def load_config(path) -> dict:
    """Read a key=value config file into a partial settings dict."""
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def build_config(file_values: dict | None = None,
                 flag_values: dict | None = None) -> PipelineConfig:
    """Merge defaults, config-file values, and flags (rightmost wins).

    ``flag_values`` entries that are None count as not given.
    """
    merged = dict(DEFAULTS)
    merged.update(file_values or {})
    for key, value in (flag_values or {}).items():
        if key not in merged:
            raise ValueError(f"unknown config key {key!r}")
        if value is not None:
            merged[key] = value
    names = {f.name for f in fields(PipelineConfig)}
    unknown = set(merged) - names
    if unknown:
        raise ValueError(f"unknown config key {sorted(unknown)[0]!r}")
    return PipelineConfig(**merged)
