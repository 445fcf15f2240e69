"""Experiment configuration read from TOML.

Schema (all tables optional except ``[[methods]]``)::

    seed = 0                 # global seed (sampling directions, synthetic data)
    out_dir = "out"
    fstar_slack = 0.0        # f* proxy = best f over all methods - slack
    record_timing = false    # wall_ns column is 0 unless true (keeps output byte-stable)
    plot_axes = ["iteration", "hvp_equiv"]

    [problem]
    source = "synth"         # "synth", "libsvm" or "quadratic"
    n = 500                  # synth only
    d = 50
    flip = 0.08              # label-flip probability (synth)
    data_seed = 7            # defaults to the global seed
    path = "a9a.txt"         # libsvm only, relative to the config file
    zero_one = false         # libsvm labels are 0/1
    normalize = true
    dim = 0                  # libsvm: force the feature dimension (0 = infer)
    mu = 0.0
    diag = [1.0, 4.0]        # quadratic only: f = 1/2 x^T diag(diag) x - b^T x
    b = [1.0, 0.0]

    [start]
    kind = "ones"            # "zeros" or "ones"
    scale = 3.0

    [stop]
    max_iters = 200
    gtol = 1e-10

    [[methods]]
    name = "cubic-lbfgs"     # unique; used for file names
    kind = "cubic"           # gd | cubic | accelerated | alt-cubic | exact-crn |
                             # damped-newton | lbfgs | lsr1
    hessian = "lbfgs-history"
    memory = 10
    # optional: M, delta0, gamma_inc, gamma_dec, upsilon, base_scale,
    # sample_memory, max_inner, rollback_cap, lr, damping, max_iters, gtol
"""

import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..solvers import HESSIAN_POLICIES

METHOD_KINDS = ("gd", "cubic", "accelerated", "alt-cubic", "exact-crn", "damped-newton", "lbfgs", "lsr1")
PLOT_AXES = ("iteration", "hvp_equiv")

_CUBIC_KEYS = {"M", "delta0", "gamma_inc", "gamma_dec", "hessian", "upsilon", "base_scale",
               "memory", "sample_memory", "max_inner", "rollback_cap"}
_METHOD_KEYS = {
    "gd": {"lr"},
    "cubic": _CUBIC_KEYS,
    "accelerated": _CUBIC_KEYS,
    "alt-cubic": _CUBIC_KEYS,
    "exact-crn": _CUBIC_KEYS - {"hessian", "upsilon", "base_scale", "memory", "sample_memory"},
    "damped-newton": {"damping"},
    "lbfgs": {"lr", "memory"},
    "lsr1": {"lr", "memory"},
}
_COMMON_METHOD_KEYS = {"name", "kind", "max_iters", "gtol"}
_NAME_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass
class ProblemSpec:
    source: str = "synth"
    n: int = 500
    d: int = 50
    flip: float = 0.08
    data_seed: int = None
    path: Path = None
    zero_one: bool = False
    normalize: bool = True
    dim: int = 0
    mu: float = 0.0
    diag: tuple = ()
    b: tuple = ()


@dataclass
class MethodSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)
    max_iters: int = None
    gtol: float = None


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    methods: list
    seed: int = 0
    out_dir: Path = Path("out")
    start_kind: str = "zeros"
    start_scale: float = 1.0
    max_iters: int = 200
    gtol: float = 1e-10
    fstar_slack: float = 0.0
    record_timing: bool = False
    plot_axes: tuple = PLOT_AXES

    def with_overrides(self, seed=None, out_dir=None, max_iters=None):
        cfg = ExperimentConfig(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        if seed is not None:
            cfg.seed = seed
        if out_dir is not None:
            cfg.out_dir = Path(out_dir)
        if max_iters is not None:
            if max_iters < 0:
                raise ConfigError("--max-iters must be nonnegative")
            cfg.max_iters = max_iters
            cfg.methods = [MethodSpec(m.name, m.kind, dict(m.params), None, m.gtol) for m in self.methods]
        return cfg


def _take(table, key, kind, default, where):
    if key not in table:
        return default
    val = table[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if kind is int and isinstance(val, bool) or not isinstance(val, kind):
        raise ConfigError(f"{where}.{key} must be {kind.__name__}, got {val!r}")
    return val


def _check_keys(table, allowed, where):
    extra = set(table) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(extra))}")


def _parse_problem(table, base_dir):
    _check_keys(table, ProblemSpec.__dataclass_fields__, "[problem]")
    p = ProblemSpec()
    p.source = _take(table, "source", str, p.source, "problem")
    if p.source not in ("synth", "libsvm", "quadratic"):
        raise ConfigError(f"problem.source must be 'synth', 'libsvm' or 'quadratic', got {p.source!r}")
    p.n = _take(table, "n", int, p.n, "problem")
    p.d = _take(table, "d", int, p.d, "problem")
    p.flip = _take(table, "flip", float, p.flip, "problem")
    p.data_seed = _take(table, "data_seed", int, None, "problem")
    p.zero_one = _take(table, "zero_one", bool, False, "problem")
    p.normalize = _take(table, "normalize", bool, True, "problem")
    p.dim = _take(table, "dim", int, 0, "problem")
    p.mu = _take(table, "mu", float, 0.0, "problem")
    if p.mu < 0:
        raise ConfigError("problem.mu must be nonnegative")
    if p.source == "synth":
        if p.n < 1 or p.d < 1:
            raise ConfigError("problem.n and problem.d must be at least 1")
        if not 0 <= p.flip <= 0.5:
            raise ConfigError("problem.flip must lie in [0, 0.5]")
    elif p.source == "quadratic":
        diag = _take(table, "diag", list, [], "problem")
        b = _take(table, "b", list, [0.0] * len(diag), "problem")
        if not diag or len(b) != len(diag):
            raise ConfigError("problem.diag must be nonempty and match problem.b in length")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in diag + b):
            raise ConfigError("problem.diag and problem.b must hold numbers")
        if min(diag) < 0:
            raise ConfigError("problem.diag must be nonnegative")
        p.diag, p.b = tuple(map(float, diag)), tuple(map(float, b))
    else:
        if "path" not in table:
            raise ConfigError("problem.path is required for source = 'libsvm'")
        path = Path(_take(table, "path", str, None, "problem"))
        p.path = path if path.is_absolute() else base_dir / path
        if not p.path.is_file():
            raise ConfigError(f"data file not found: {p.path}")
    return p


def _parse_method(table, idx):
    where = f"methods[{idx}]"
    if "name" not in table or "kind" not in table:
        raise ConfigError(f"{where} needs 'name' and 'kind'")
    name = _take(table, "name", str, None, where)
    kind = _take(table, "kind", str, None, where)
    if not _NAME_RE.match(name):
        raise ConfigError(f"{where}.name {name!r} may only use letters, digits, '_', '-', '.'")
    if kind not in METHOD_KINDS:
        raise ConfigError(f"{where}.kind {kind!r} is not one of {', '.join(METHOD_KINDS)}")
    _check_keys(table, _METHOD_KEYS[kind] | _COMMON_METHOD_KEYS, where)
    params = {}
    for key, val in table.items():
        if key in _COMMON_METHOD_KEYS:
            continue
        if key == "hessian":
            if val not in HESSIAN_POLICIES:
                raise ConfigError(f"{where}.hessian {val!r} is not one of {', '.join(HESSIAN_POLICIES)}")
            params[key] = val
        elif key in ("memory", "sample_memory", "max_inner", "rollback_cap"):
            params[key] = _take(table, key, int, None, where)
        else:
            params[key] = _take(table, key, float, None, where)
    return MethodSpec(
        name, kind, params,
        _take(table, "max_iters", int, None, where),
        _take(table, "gtol", float, None, where),
    )


def parse_config(data, base_dir=Path(".")):
    """Validate a decoded TOML tree into an :class:`ExperimentConfig`."""
    top = {"seed", "out_dir", "fstar_slack", "record_timing", "plot_axes", "problem", "start", "stop", "methods"}
    _check_keys(data, top, "top level")
    problem = _parse_problem(data.get("problem", {}), base_dir)
    methods_raw = data.get("methods", [])
    if not isinstance(methods_raw, list) or not methods_raw:
        raise ConfigError("at least one [[methods]] entry is required")
    methods = [_parse_method(m, i) for i, m in enumerate(methods_raw)]
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError("method names must be unique")
    start = data.get("start", {})
    _check_keys(start, {"kind", "scale"}, "[start]")
    stop = data.get("stop", {})
    _check_keys(stop, {"max_iters", "gtol"}, "[stop]")
    cfg = ExperimentConfig(problem=problem, methods=methods)
    cfg.seed = _take(data, "seed", int, 0, "config")
    out_dir = Path(_take(data, "out_dir", str, "out", "config"))
    cfg.out_dir = out_dir if out_dir.is_absolute() else base_dir / out_dir
    cfg.fstar_slack = _take(data, "fstar_slack", float, 0.0, "config")
    if cfg.fstar_slack < 0:
        raise ConfigError("fstar_slack must be nonnegative")
    cfg.record_timing = _take(data, "record_timing", bool, False, "config")
    axes = _take(data, "plot_axes", list, list(PLOT_AXES), "config")
    if not axes or any(a not in PLOT_AXES for a in axes):
        raise ConfigError(f"plot_axes entries must be among {PLOT_AXES}")
    cfg.plot_axes = tuple(axes)
    cfg.start_kind = _take(start, "kind", str, "zeros", "start")
    if cfg.start_kind not in ("zeros", "ones"):
        raise ConfigError("start.kind must be 'zeros' or 'ones'")
    cfg.start_scale = _take(start, "scale", float, 1.0, "start")
    cfg.max_iters = _take(stop, "max_iters", int, 200, "stop")
    cfg.gtol = _take(stop, "gtol", float, 1e-10, "stop")
    if cfg.max_iters < 0 or cfg.gtol < 0:
        raise ConfigError("stop.max_iters and stop.gtol must be nonnegative")
    return cfg


def load_config(path):
    """Read and validate a TOML experiment file; raises :class:`ConfigError`."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent)
