"""Experiment configuration: TOML with an explicit schema version.

Every table and key is checked against :data:`SCHEMA`; unknown keys and
wrong types raise ConfigError naming the dotted path.  Validation touches no
output directory, so an invalid file leaves no artifacts behind.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AdmissibilityError, ConfigError, RoughwaveError
from .metric import MetricSpec, make_metric
from .parametrix import FrequencyProfile
from .strichartz import admissible

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1

_NUM = (int, float)

# section -> key -> (accepted types, default)
SCHEMA = {
    "run": {
        "seed": (int, 0),
        "output_dir": (str, None),
        "strict": (bool, False),
    },
    "eikonal": {
        "eps_ladder": (list, [0.025, 0.05, 0.1]),
        "n_geodesics": (int, 42),
        "tolerance": (_NUM, 1e-6),
    },
    "parametrix": {
        "levels": (list, [0, 1, 2]),
        "profile": (str, "radial_one"),
        "n_probes": (int, 6),
    },
    "lemma": {
        "pairs_file": (str, None),
        "n_omega": (int, 40),
        "n_pairs": (list, [8, 8, 12]),
    },
    "kernel": {
        "j": (int, 4),
        "tau_min": (_NUM, 1.6),
        "n_tau": (int, 6),
        "offset": (_NUM, 0.1),
        "ratio_ceiling": (_NUM, None),
    },
    "strichartz": {
        "p": ((int, float, str), 4),
        "q": ((int, float, str), 4),
        "levels": (list, [3, 4, 5, 6]),
        "profile": (str, "radial_one"),
        "margin": (_NUM, 0.1),
    },
}


@dataclass
class ExperimentConfig:
    metric: MetricSpec
    sections: dict
    source: str = "<defaults>"
    raw: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.sections[name]

    @property
    def seed(self):
        return self.sections["run"]["seed"]

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION, "metric": self.metric.to_dict()}
        out.update({k: dict(v) for k, v in self.sections.items()})
        return out

    def digest(self):
        """sha256 of the canonical JSON form of the resolved configuration."""
        text = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _type_ok(value, types):
    if isinstance(value, bool) and types is not bool and bool not in (types if isinstance(types, tuple) else (types,)):
        return False
    return isinstance(value, types)


def _section(data, name, base):
    schema = SCHEMA[name]
    if not isinstance(data, dict):
        raise ConfigError(f"{base}{name}", "expected a table")
    out = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"{base}{name}.{key}", "unknown key")
        types, _ = schema[key]
        if not _type_ok(value, types):
            raise ConfigError(f"{base}{name}.{key}", f"wrong type {type(value).__name__}")
        out[key] = value
    for key, (_, default) in schema.items():
        out.setdefault(key, default)
    return out


def _numbers(values, path, kind=_NUM):
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, kind):
            raise ConfigError(f"{path}[{i}]", "expected a number")


def load_pairs(path, where="lemma.pairs_file"):
    """JSON list of {t, x, s, y} with 0 <= t < s <= 1."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(where, f"file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(where, f"invalid JSON ({exc.msg})") from None
    if not isinstance(data, list):
        raise ConfigError(where, "expected a JSON list")
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"t", "x", "s", "y"}:
            raise ConfigError(f"{where}[{i}]", "expected keys t, x, s, y")
        if not (0.0 <= item["t"] < item["s"] <= 1.0):
            raise ConfigError(f"{where}[{i}]", "need 0 <= t < s <= 1")
        for k in ("x", "y"):
            if not (isinstance(item[k], list) and len(item[k]) == 3):
                raise ConfigError(f"{where}[{i}].{k}", "expected 3 coordinates")
    return data


def validate(cfg):
    """Cross-field checks run before any computation."""
    try:
        make_metric(cfg.metric)
    except ConfigError:
        raise
    except RoughwaveError as exc:
        raise ConfigError("metric", str(exc)) from None
    par = cfg["parametrix"]
    _numbers(par["levels"], "parametrix.levels", int)
    if any(j < 0 or j > 7 for j in par["levels"]):
        raise ConfigError("parametrix.levels", "levels must lie in 0..7")
    for sec in ("parametrix", "strichartz"):
        try:
            FrequencyProfile.from_name(cfg[sec]["profile"])
        except ValueError as exc:
            raise ConfigError(f"{sec}.profile", str(exc)) from None
    st = cfg["strichartz"]
    try:
        admissible(st["p"], st["q"])
    except AdmissibilityError as exc:
        raise ConfigError("strichartz", f"pair not admissible: {exc}") from None
    _numbers(st["levels"], "strichartz.levels", int)
    if len(st["levels"]) < 2 or any(j < 0 or j > 7 for j in st["levels"]):
        raise ConfigError("strichartz.levels", "need at least two levels in 0..7")
    ek = cfg["eikonal"]
    _numbers(ek["eps_ladder"], "eikonal.eps_ladder")
    if any(not (0.0 < e <= cfg.metric.epsilon_max) for e in ek["eps_ladder"]):
        raise ConfigError("eikonal.eps_ladder", f"entries must lie in (0, {cfg.metric.epsilon_max}]")
    if not 1 <= ek["n_geodesics"] <= 42:
        raise ConfigError("eikonal.n_geodesics", "must lie in 1..42")
    le = cfg["lemma"]
    _numbers(le["n_pairs"], "lemma.n_pairs", int)
    if len(le["n_pairs"]) != 3 or any(k < 0 for k in le["n_pairs"]):
        raise ConfigError("lemma.n_pairs", "expected three nonnegative counts (OnS, Interior, Exterior)")
    if le["pairs_file"] is not None:
        load_pairs(le["pairs_file"])
    ke = cfg["kernel"]
    if not 0 <= ke["j"] <= 7:
        raise ConfigError("kernel.j", "must lie in 0..7")
    if not (0.0 < ke["tau_min"] and 10.0 * ke["tau_min"] <= 2.0 ** ke["j"] + 1e-12):
        raise ConfigError("kernel.tau_min", "the decade [tau_min, 10 tau_min] must fit in (0, 2^j]")
    if ke["n_tau"] < 3:
        raise ConfigError("kernel.n_tau", "need at least 3 separations")
    if not math.isfinite(ke["offset"]) or ke["offset"] <= 0.0:
        raise ConfigError("kernel.offset", "must be positive")
    return cfg


def from_mapping(data, source="<mapping>"):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a table")
    if "schema_version" not in data:
        raise ConfigError("schema_version", "missing")
    if data["schema_version"] != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {data['schema_version']!r}")
    sections = {}
    for key in data:
        if key not in SCHEMA and key not in ("schema_version", "metric"):
            raise ConfigError(key, "unknown key")
    for name in SCHEMA:
        sections[name] = _section(data.get(name, {}), name, "")
    metric = MetricSpec.from_mapping(data.get("metric", {}), "metric")
    cfg = ExperimentConfig(metric, sections, source, data)
    return validate(cfg)


def load(path=None):
    """Parse and validate a TOML file (defaults when ``path`` is None)."""
    if path is None:
        return from_mapping({"schema_version": SCHEMA_VERSION}, "<defaults>")
    p = Path(path)
    if not p.exists():
        raise ConfigError(str(path), "file not found")
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML ({exc})") from None
    return from_mapping(data, str(path))
