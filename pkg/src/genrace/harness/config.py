"""Race configuration: a flat ``key = value`` text format.

Top-level keys::

    n_var = 20
    epsilons = 0.001, 0.01
    models = qcbm, rnn, tf, vae, wgan
    n_epochs = 1000
    eval_interval = 100
    eval_epoch0 = true
    n_seeds = 10
    master_seed = 0
    dataset_seed = 0
    target_min_cost = -12
    Q = 10000
    Q_u = 100
    draw_cap = 10000
    batch = 1000
    workers = 1
    out = runs/default

Model hyperparameters use the DEFAULTS names verbatim, prefixed by the model
tag (``rnn.Learning rate = 1e-3``). A ``@<epsilon>`` suffix on the tag scopes a
value to one data portion (``wgan@0.01.Prior size = 8``). Grid axes are
``grid.<tag>.<name> = v1, v2, ...``. ``#`` starts a comment.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

MODEL_TAGS = ("qcbm", "rnn", "tf", "vae", "wgan")

DEFAULTS = {
    "qcbm": {
        "Number of layers": 8,
        "Circuit topology": "Line topology",
        "Optimizer": "CMA-ES optimizer",
        "sigma0": 0.1,
        "Initialization": "Random initialization between -pi/2 and pi/2",
    },
    "rnn": {
        "Architecture": "GRU",
        "Number of layers": 1,
        "Optimizer": "Adam optimizer",
        "Learning rate": 1e-3,
        "Number of hidden units": 32,
    },
    "tf": {
        "Number of layers": 1,
        "Number of attention heads": 1,
        "Embedding dimension size": 64,
        "Size of FFNN output": 64,
        "Optimizer": "Adam optimizer",
        "Learning rate": 1e-3,
    },
    "vae": {
        "Prior size": 128,
        "Encoder hidden layers width": 128,
        "Number of hidden layers of encoder net": 2,
        "Decoder hidden layers width": 128,
        "Number of hidden layers of decoder net": 2,
        "Temperature 1/beta": 0.0,
        "Optimizer": "Adam optimizer",
        "Learning rate": 1e-3,
        "batch_size": 64,
    },
    "wgan": {
        "Number of hidden layers of generator net": 2,
        "Number of hidden layers of discriminator net": 2,
        "Optimizer": "Adam optimizer",
        "Gradient regularization": 10.0,
        "n_critic": 5,
        "batch_size": 64,
    },
}

# data-portion dependent presets
EPSILON_PRESETS = {
    "wgan": {
        0.01: {"Prior size": 8, "Generator hidden layers width": 8,
               "Discriminator hidden layers width": 8, "Learning rate": 1e-2},
        0.001: {"Prior size": 128, "Generator hidden layers width": 128,
                "Discriminator hidden layers width": 128, "Learning rate": 1e-3},
    },
}

# grid axes: learning rate plus one width-like axis
DEFAULT_GRIDS = {
    "qcbm": {"Number of layers": [2, 4, 6, 8]},
    "rnn": {"Number of hidden units": [8, 16, 32, 64, 128], "Learning rate": [1e-4, 1e-3, 1e-2]},
    "tf": {"Embedding dimension size": [8, 16, 32, 64, 128], "Learning rate": [1e-4, 1e-3, 1e-2]},
    "vae": {"Prior size": [8, 16, 32, 64, 128], "Learning rate": [1e-4, 1e-3, 1e-2]},
    "wgan": {"Prior size": [8, 16, 32, 64, 128], "Learning rate": [1e-4, 1e-3, 1e-2]},
}

# widths tied to a primary size; overriding the primary moves them too
TIED_WIDTHS = {
    "tf": ("Embedding dimension size", ("Size of FFNN output",)),
    "vae": ("Prior size", ("Encoder hidden layers width", "Decoder hidden layers width")),
    "wgan": ("Prior size", ("Generator hidden layers width", "Discriminator hidden layers width")),
}


def apply_overrides(tag: str, hp: dict, updates: dict) -> dict:
    """``hp`` updated with ``updates``; tied widths follow their primary unless
    set explicitly in the same update."""
    out = dict(hp)
    out.update(updates)
    primary, tied = TIED_WIDTHS.get(tag, (None, ()))
    if primary in updates:
        for key in tied:
            if key not in updates:
                out[key] = updates[primary]
    return out


# keys that do not influence results
_RUNTIME_KEYS = ("out", "workers")


class ConfigError(ValueError):
    pass


@dataclass
class RaceConfig:
    n_var: int = 20
    epsilons: list = field(default_factory=lambda: [0.001, 0.01])
    models: list = field(default_factory=lambda: list(MODEL_TAGS))
    n_epochs: int = 1000
    eval_interval: int = 100
    eval_epoch0: bool = True
    n_seeds: int = 10
    master_seed: int = 0
    dataset_seed: int = 0
    target_min_cost: int | None = -12
    Q: int = 10_000
    Q_u: int = 100
    draw_cap: int = 10_000
    batch: int = 1_000
    workers: int = 1
    out: str = "runs/default"
    overrides: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_var < 2:
            raise ConfigError("n_var must be at least 2")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be at least 1")
        if self.eval_interval < 1 or self.n_epochs % self.eval_interval:
            raise ConfigError(f"eval_interval {self.eval_interval} must divide n_epochs {self.n_epochs}")
        if not self.epsilons or any(not 0 < e <= 1 for e in self.epsilons):
            raise ConfigError(f"epsilons must lie in (0, 1], got {self.epsilons}")
        for tag in self.models:
            if tag not in MODEL_TAGS:
                raise ConfigError(f"unknown model tag {tag!r}; known: {', '.join(MODEL_TAGS)}")
        for scope in self.overrides:
            if scope.split("@")[0] not in MODEL_TAGS:
                raise ConfigError(f"hyperparameters given for unknown model {scope!r}")
        for tag in self.grids:
            if tag not in MODEL_TAGS:
                raise ConfigError(f"grid given for unknown model {tag!r}")

    @property
    def eval_epochs(self) -> list[int]:
        start = 0 if self.eval_epoch0 else self.eval_interval
        return list(range(start, self.n_epochs + 1, self.eval_interval))

    def hyperparameters(self, tag: str, epsilon: float) -> dict:
        """Built-in defaults, then the nearest ε preset, then user overrides."""
        hp = copy.deepcopy(DEFAULTS[tag])
        presets = EPSILON_PRESETS.get(tag)
        if presets:
            nearest = min(presets, key=lambda e: abs(math.log(e) - math.log(epsilon)))
            hp.update(presets[nearest])
        hp = apply_overrides(tag, hp, self.overrides.get(tag, {}))
        for scope, values in self.overrides.items():
            if "@" in scope:
                t, eps = scope.split("@", 1)
                if t == tag and math.isclose(float(eps), epsilon, rel_tol=1e-9):
                    hp = apply_overrides(tag, hp, values)
        return hp

    def grid(self, tag: str) -> dict:
        return self.grids.get(tag, DEFAULT_GRIDS[tag])

    def canonical(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in _RUNTIME_KEYS}
        return json.loads(json.dumps(d, sort_keys=True))

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_text(self) -> str:
        lines = []
        for k in self.__dataclass_fields__:
            if k in ("overrides", "grids"):
                continue
            v = getattr(self, k)
            if isinstance(v, list):
                v = ", ".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{k} = {'none' if v is None else v}")
        for scope, values in sorted(self.overrides.items()):
            lines += [f"{scope}.{name} = {val}" for name, val in values.items()]
        for tag, axes in sorted(self.grids.items()):
            lines += [f"grid.{tag}.{name} = {', '.join(map(str, vals))}" for name, vals in axes.items()]
        return "\n".join(lines) + "\n"


def _scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


_LIST_KEYS = ("epsilons", "models")
# <tag>[@<epsilon>].<hyperparameter name>
_SCOPED = re.compile(r"^([a-z]+)(?:@([0-9.eE+-]*[0-9]))?\.(\D.*)$")


def parse_config(text: str, source: str = "<config>") -> RaceConfig:
    top: dict = {}
    overrides: dict = {}
    grids: dict = {}
    fields = RaceConfig.__dataclass_fields__
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("grid."):
            _, tag, name = key.split(".", 2)
            grids.setdefault(tag, {})[name] = [_scalar(v) for v in value.split(",")]
        elif _SCOPED.match(key) and _SCOPED.match(key).group(1) in MODEL_TAGS:
            tag, eps, name = _SCOPED.match(key).groups()
            scope = tag
            if eps is not None:
                # normalise so 0.010 and 1e-2 land in the same scope
                try:
                    scope = f"{tag}@{float(eps)!r}"
                except ValueError:
                    raise ConfigError(f"{source}:{lineno}: bad epsilon scope {eps!r}") from None
            overrides.setdefault(scope, {})[name.strip()] = _scalar(value)
        elif key in fields and key not in ("overrides", "grids"):
            if key in _LIST_KEYS:
                items = [v.strip() for v in value.split(",") if v.strip()]
                top[key] = [float(v) for v in items] if key == "epsilons" else items
            else:
                top[key] = _scalar(value)
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
    for key in ("n_var", "n_epochs", "eval_interval", "n_seeds", "master_seed", "dataset_seed",
                "Q", "Q_u", "draw_cap", "batch", "workers"):
        if key in top and not isinstance(top[key], int):
            raise ConfigError(f"{source}: {key} must be an integer, got {top[key]!r}")
    try:
        return RaceConfig(**top, overrides=overrides, grids=grids)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | Path) -> RaceConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))
