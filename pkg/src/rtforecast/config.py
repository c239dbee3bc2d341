"""Run configuration: INI-style sections, presets, validation.

Example::

    [run]
    series = prices.csv
    column = close
    T = 200
    N = 30
    seed = 7

    [method.lstm]
    epochs = 50
    learning_rate = 0.01

    [method.ar]
    p = 5

A method section is ``[method.<name>]``; ``kind`` defaults to ``<name>``.
"""

import configparser
import json
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .harness import METHOD_KEYS, METHOD_KINDS, MethodSpec
from .windows import FEEDBACK_MODES

# Training/forecast lengths per series, and the AR / ARIMA orders reported as best for each.
PRESETS = {
    "apple":       {"T": 1228, "N": 30, "ar_p": 300, "arima": (10, 0, 2)},
    "microsoft":   {"T": 1228, "N": 30, "ar_p": 400, "arima": (10, 2, 1)},
    "google":      {"T": 1228, "N": 30, "ar_p": 400, "arima": (0, 1, 1)},
    "bitcoin":     {"T": 1064, "N": 30, "ar_p": 100, "arima": (6, 0, 2)},
    "ethereum":    {"T": 1064, "N": 30, "ar_p": 100, "arima": (6, 1, 1)},
    "cardano":     {"T": 1064, "N": 30, "ar_p": 300, "arima": (8, 2, 1)},
    "oil":         {"T": 8248, "N": 200, "ar_p": 200, "arima": (4, 1, 1)},
    "natural_gas": {"T": 5802, "N": 150, "ar_p": 200, "arima": (10, 1, 2)},
    "gold":        {"T": 816, "N": 30, "ar_p": 100, "arima": (8, 2, 0)},
}

# Published mean relative errors (LSTM, EKF, AR, ARIMA) on the original market data.
# Reference only: the data and the LSTM architecture behind them are not available.
REPORTED_ERRORS = {
    "apple":       {"lstm": 5.9e-2, "ekf": 4.5e-1, "ar": 2.5e-1, "arima": 7.5e-2},
    "microsoft":   {"lstm": 5.5e-2, "ekf": 4.2e-1, "ar": 4.3e-1, "arima": 6.3e-2},
    "google":      {"lstm": 3.5e-2, "ekf": 4.7e-1, "ar": 4.7e-1, "arima": 5.5e-2},
    "bitcoin":     {"lstm": 2.1e-1, "ekf": 2.7e0, "ar": 4.0e-1, "arima": 3.8e-1},
    "ethereum":    {"lstm": 1.8e-1, "ekf": 2.9e0, "ar": 8.1e-1, "arima": 1.0e0},
    "cardano":     {"lstm": 2.7e-1, "ekf": 4.3e0, "ar": 1.2e0, "arima": 1.7e0},
    "oil":         {"lstm": 1.5e-1, "ekf": 4.6e0, "ar": 6.3e-1, "arima": 3.0e-1},
    "natural_gas": {"lstm": 2.0e-1, "ekf": 3.4e0, "ar": 8.0e-1, "arima": 1.0e0},
    "gold":        {"lstm": 7.7e-2, "ekf": 2.4e0, "ar": 1.2e0, "arima": 1.1e0},
}

RUN_KEYS = {
    "series": str, "column": str, "time_column": str, "T": int, "N": int,
    "feedback": str, "seed": int, "output": str, "workers": int, "preset": str,
}

PARAM_TYPES = {
    "epochs": int, "learning_rate": float, "beta1": float, "beta2": float, "epsilon": float,
    "init": str, "init_scale": float, "seed": int, "hidden_dim": int, "num_layers": int,
    "reset_adam": bool, "q_scale": float, "r_scale": float, "p": int, "d": int, "q": int,
    "refit": bool, "scaling": bool,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(key, raw, kind):
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    if kind is bool:
        text = str(raw).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ValueError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


@dataclass
class RunConfig:
    series: str = None
    column: str = "1"
    time_column: str = "0"
    T: int = None
    N: int = None
    feedback: str = "prediction"
    seed: int = None
    output: str = None
    workers: int = 1
    preset: str = None
    methods: list = field(default_factory=list)

    @classmethod
    def from_ini(cls, text, source="<config>"):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        data = {"methods": []}
        problems = []
        for section in parser.sections():
            items = dict(parser.items(section))
            if section == "run":
                data.update(items)
            elif section.startswith("method."):
                name = section[len("method."):]
                kind = items.pop("kind", name)
                data["methods"].append({"name": name, "kind": kind, "params": items})
            else:
                problems.append(f"unknown section [{section}]")
        return cls.from_dict(data, problems)

    @classmethod
    def from_dict(cls, data, problems=None):
        """Build from plain data. Raises ``ConfigError`` on unknown keys or bad
        types; range and consistency checks are left to ``validate``."""
        problems = list(problems or [])
        kwargs = {}
        for key, value in data.items():
            if key == "methods":
                continue
            if key not in RUN_KEYS:
                problems.append(f"unknown run key {key!r}")
                continue
            if value is None:
                kwargs[key] = None
                continue
            try:
                kwargs[key] = _convert(key, value, RUN_KEYS[key])
            except ValueError as exc:
                problems.append(str(exc))
        methods = []
        for m in data.get("methods", []):
            name = m["name"]
            kind = m.get("kind") or name
            params = {}
            for key, value in m.get("params", {}).items():
                if kind in METHOD_KEYS and key not in METHOD_KEYS[kind]:
                    problems.append(f"[method.{name}]: unknown key {key!r} for kind {kind!r}")
                    continue
                try:
                    params[key] = _convert(key, value, PARAM_TYPES.get(key, str))
                except ValueError as exc:
                    problems.append(f"[method.{name}]: {exc}")
            methods.append(MethodSpec(name, kind, params))
        cfg = cls(**kwargs, methods=methods)
        if problems:
            # report semantic issues alongside the parse errors; otherwise they wait
            # for validate(), after command-line overrides have been applied
            raise ConfigError(problems + cfg.problems(require_series=False))
        return cfg

    def override(self, **values):
        """Apply non-``None`` overrides (command-line flags win over the file)."""
        for key, value in values.items():
            if value is not None:
                setattr(self, key, _convert(key, value, RUN_KEYS[key]))
        return self

    def apply_preset(self):
        if not self.preset:
            return self
        preset = PRESETS[self.preset]
        if self.T is None:
            self.T = preset["T"]
        if self.N is None:
            self.N = preset["N"]
        p, d, q = preset["arima"]
        for m in self.methods:
            if m.kind == "ar":
                m.params.setdefault("p", preset["ar_p"])
            elif m.kind == "arima":
                m.params.setdefault("p", p)
                m.params.setdefault("d", d)
                m.params.setdefault("q", q)
        return self

    def problems(self, require_series=True):
        """Every validation problem at once (empty list when valid)."""
        out = []
        if self.preset is not None and self.preset not in PRESETS:
            out.append(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if require_series and not self.series:
            out.append("no input series given")
        if require_series or (self.T is not None and self.N is not None):
            if self.T is None or self.N is None:
                out.append("T and N are required (directly or via a preset)")
            elif not self.T > self.N >= 1:
                out.append(f"need T > N >= 1, got T={self.T}, N={self.N}")
        if self.feedback not in FEEDBACK_MODES:
            out.append(f"feedback must be one of {FEEDBACK_MODES}")
        if self.workers is not None and self.workers < 1:
            out.append("workers must be >= 1")
        names = [m.name for m in self.methods]
        for dup in sorted({n for n in names if names.count(n) > 1}):
            out.append(f"duplicate method name {dup!r}")
        for m in self.methods:
            if m.kind not in METHOD_KINDS:
                out.append(f"[method.{m.name}]: unknown kind {m.kind!r}")
                continue
            if m.params.get("epochs", 1) < 1:
                out.append(f"[method.{m.name}]: epochs must be >= 1")
            for order in ("p", "d", "q"):
                if m.params.get(order, 0) < 0:
                    out.append(f"[method.{m.name}]: {order} must be >= 0")
            if m.kind == "lstm" and require_series and self.seed is None and "seed" not in m.params:
                out.append(f"[method.{m.name}]: LSTM runs need a seed (--seed or seed = ... in the config)")
        return out

    def validate(self):
        problems = self.problems(require_series=True)
        if problems:
            raise ConfigError(problems)
        return self

    def to_dict(self):
        out = {k: v for k, v in asdict(self).items() if k != "methods"}
        out["methods"] = [{"name": m.name, "kind": m.kind, "params": dict(sorted(m.params.items()))}
                          for m in self.methods]
        return out

    def to_ini(self):
        lines = ["[run]"]
        for key in RUN_KEYS:
            value = getattr(self, key)
            if value is not None:
                lines.append(f"{key} = {value}")
        for m in self.methods:
            lines += ["", f"[method.{m.name}]", f"kind = {m.kind}"]
            lines += [f"{k} = {v}" for k, v in sorted(m.params.items())]
        return "\n".join(lines) + "\n"

    def single(self, spec):
        """Copy restricted to one method (what a replayed report needs)."""
        data = self.to_dict()
        data["methods"] = [{"name": spec.name, "kind": spec.kind, "params": dict(spec.params)}]
        return RunConfig.from_dict(data)


def load_config(path):
    """Read an INI config, or the ``run_config`` echoed inside a report JSON."""
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        data = json.loads(text)
        if "run_config" in data.get("config", {}):
            data = data["config"]["run_config"]
        return RunConfig.from_dict(data)
    return RunConfig.from_ini(text, source=path)
