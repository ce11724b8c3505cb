"""Pipeline configuration: a YAML file, defaults and dotted-key overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .corpus import PrecedentSpec
from .textprep import DEFAULT_CITATION_PATTERNS, DEFAULT_DATE_PATTERNS, MaskingRules, TextPreprocessor, load_stopwords

DEFAULTS: dict[str, Any] = {
    "labeled": None,
    "unlabeled": None,
    "out_dir": "out",
    "seed": 0,
    "workers": 1,
    "textprep": {"stopwords": None, "citation_patterns": None, "date_patterns": None},
    "vectorize": {"tf_mode": "count", "l2_normalize": False},
    "split": {"test_frac": 0.1, "val_frac": 0.1},
    "retune": {"source": "auto"},
    "models": {
        "menu": ["svm", "logistic", "forest", "regex"],
        "logistic": {"l2": 1e-4, "lr": 0.1, "epochs": 100},
        "svm": {"l2": 1e-4, "lr": 0.1, "epochs": 100, "average": True},
        "forest": {"trees": 100, "max_depth": None, "min_leaf": 1, "max_features": "sqrt", "bootstrap": True},
        "external": [],
    },
    "analysis": {
        "bin_width": "6M",
        "top_k": 3,
        "breakdown_fields": ["process_type", "state", "decision"],
        "breakdown_models": None,
    },
    "explain": {
        "k": 5,
        "forest_mode": "std",
        "lime_model": "logistic",
        "lime_docs": 10,
        "lime_samples": 1000,
        "lime_words": 5,
    },
    "precedents": [],
}

PATH_KEYS = ("labeled", "unlabeled", "out_dir")


class ConfigError(ValueError):
    pass


def deep_merge(base: Mapping, extra: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(d: dict, key: str, value) -> None:
    parts = key.replace("-", "_").split(".")
    cur = d
    for p in parts[:-1]:
        if not isinstance(cur.get(p), dict):
            cur[p] = {}
        cur = cur[p]
    cur[parts[-1]] = value


def parse_overrides(args: list[str]) -> dict:
    """Turn ``["--models.forest.trees", "10", "--seed=3"]`` into a nested dict.

    Values are read as YAML scalars, so numbers, booleans and lists work.
    """
    out: dict = {}
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument {arg!r}; overrides look like --key value")
        key = arg[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        elif i + 1 < len(args) and not args[i + 1].startswith("--"):
            raw = args[i + 1]
            i += 2
        else:
            raw = "true"
            i += 1
        set_dotted(out, key, yaml.safe_load(raw))
    return out


@dataclass
class PipelineConfig:
    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: Mapping | None = None) -> "PipelineConfig":
        data: dict = {}
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
            base = path.resolve().parent
        return cls.from_dict(deep_merge(data, overrides or {}), base)

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: str | Path = ".") -> "PipelineConfig":
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        cfg = cls(deep_merge(DEFAULTS, data), Path(base_dir))
        cfg.validate()
        return cfg

    def __getitem__(self, key: str):
        return self.raw[key]

    def path(self, key: str) -> Path | None:
        value = self.raw.get(key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def resolve(self, value: str | Path) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out_dir(self) -> Path:
        return self.path("out_dir")

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def workers(self) -> int:
        return max(1, int(self.raw["workers"]))

    def precedents(self) -> list[PrecedentSpec]:
        return [PrecedentSpec.from_dict(p) for p in self.raw["precedents"]]

    def preprocessor(self, precedent: PrecedentSpec | None = None) -> TextPreprocessor:
        tp = self.raw["textprep"]
        stop_path = tp.get("stopwords")
        stopwords = load_stopwords(self.resolve(stop_path) if stop_path else None)
        rules = MaskingRules(
            tuple(tp["citation_patterns"]) if tp.get("citation_patterns") else DEFAULT_CITATION_PATTERNS,
            tuple(tp["date_patterns"]) if tp.get("date_patterns") else DEFAULT_DATE_PATTERNS,
        )
        # aliases of every configured precedent are masked for every model
        aliases = [a for p in self.precedents() for a in p.aliases]
        return TextPreprocessor(stopwords, rules.with_aliases(aliases))

    def validate(self) -> None:
        precs = self.raw["precedents"]
        if not precs:
            raise ConfigError("configuration lists no precedent")
        try:
            specs = self.precedents()
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"invalid precedent entry: {exc}") from exc
        ids = [p.bp_id for p in specs]
        if len(set(ids)) != len(ids):
            raise ConfigError("precedent ids must be unique")
        menu = self.raw["models"]["menu"]
        bad = set(menu) - {"svm", "logistic", "forest", "regex"}
        if bad:
            raise ConfigError(f"unknown models in menu: {sorted(bad)}")
        for ext in self.raw["models"]["external"]:
            if not {"name", "bp_id", "labeled", "unlabeled"} <= set(ext):
                raise ConfigError("external score entries need name, bp_id, labeled and unlabeled")
        if self.raw["retune"]["source"] not in ("auto", "labeled", "unlabeled"):
            raise ConfigError("retune.source must be auto, labeled or unlabeled")
        sp = self.raw["split"]
        if not 0 < sp["test_frac"] < 1 or not 0 <= sp["val_frac"] < 1:
            raise ConfigError("split fractions out of range")

    def check_files(self) -> None:
        """Referenced input files must exist (checked when a stage needs them)."""
        for key in ("labeled", "unlabeled"):
            p = self.path(key)
            if p is None or not p.exists():
                raise ConfigError(f"{key} corpus not found: {p}")
        for ext in self.raw["models"]["external"]:
            for key in ("labeled", "unlabeled"):
                if not self.resolve(ext[key]).exists():
                    raise ConfigError(f"external scores file not found: {ext[key]}")

    def canonical(self) -> dict:
        d = copy.deepcopy(self.raw)
        # the output location and worker count never change results
        d.pop("out_dir", None)
        d.pop("workers", None)
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()
