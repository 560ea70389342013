"""JSON run configuration: parsing, validation and serialization."""
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..cone import make_cone
from ..errors import BregVOptError, ParseError, ValidationError
from ..kernels import make_kernel
from ..problems import get_problem
from ..solver import CERTIFICATES

TOP_KEYS = {
    "problem", "kernel", "cone", "x0", "ell", "stop", "certificates",
    "output", "seed", "subproblem", "timing",
}
STOP_KEYS = {"merit_tol", "max_iters"}
OUTPUT_KEYS = {"csv_path", "json_path"}
SUBPROBLEM_KEYS = {"dual_gap_tol", "dual_max_iters"}


@dataclass
class RunConfig:
    """One solver run.

    ``kernel`` and ``cone`` are optional overrides of the problem's own;
    ``certificates=None`` means every applicable certificate.
    """

    problem: str
    x0: list
    ell: float
    kernel: Optional[dict] = None
    cone: Optional[dict] = None
    stop: dict = field(default_factory=lambda: {"merit_tol": 1e-10, "max_iters": 100_000})
    certificates: Optional[list] = None
    output: dict = field(default_factory=lambda: {"csv_path": None, "json_path": None})
    seed: int = 0
    subproblem: dict = field(default_factory=lambda: {"dual_gap_tol": 1e-9, "dual_max_iters": 10_000})
    timing: bool = False

    def to_dict(self):
        return asdict(self)

    def build(self):
        """Resolve the problem with any kernel / cone overrides applied."""
        prob = get_problem(self.problem)
        if self.kernel is not None:
            spec = dict(self.kernel)
            if spec.get("name") != "log_barrier":
                spec.setdefault("n", prob.n)
            try:
                kernel = make_kernel(spec)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(str(exc), "kernel") from exc
            if kernel.n != prob.n:
                raise ValidationError(f"kernel dimension {kernel.n} != n={prob.n}", "kernel")
            prob = prob.with_kernel(kernel)
        if self.cone is not None:
            try:
                cone = make_cone(self.cone)
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(str(exc), "cone") from exc
            prob = prob.with_cone(cone)
        return prob


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _check_keys(obj, allowed, where, text):
    if not isinstance(obj, dict):
        raise ParseError(f"{where or 'config'} must be a JSON object", _line_of(text, where), where)
    for key in obj:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ParseError(f"unknown key {name!r}", _line_of(text, key), name)


def _number(value, name, text, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{name} must be a number", _line_of(text, name.split(".")[-1]), name)
    if integer and (not float(value).is_integer()):
        raise ParseError(f"{name} must be an integer", _line_of(text, name.split(".")[-1]), name)
    return int(value) if integer else float(value)


def config_from_dict(data, text=None):
    """Build and validate a :class:`RunConfig` from decoded JSON."""
    _check_keys(data, TOP_KEYS, "", text)
    for req in ("problem", "x0", "ell"):
        if req not in data:
            raise ParseError(f"missing required key {req!r}", None, req)
    if not isinstance(data["problem"], str):
        raise ParseError("problem must be a string", _line_of(text, "problem"), "problem")
    x0 = data["x0"]
    if isinstance(x0, (int, float)) and not isinstance(x0, bool):
        x0 = [x0]
    if not isinstance(x0, list):
        raise ParseError("x0 must be a list of numbers", _line_of(text, "x0"), "x0")
    x0 = [_number(v, "x0", text) for v in x0]
    cfg = RunConfig(problem=data["problem"], x0=x0, ell=_number(data["ell"], "ell", text))

    if "kernel" in data and data["kernel"] is not None:
        if not isinstance(data["kernel"], dict) or "name" not in data["kernel"]:
            raise ParseError("kernel must be an object with a name", _line_of(text, "kernel"), "kernel")
        cfg.kernel = dict(data["kernel"])
    if "cone" in data and data["cone"] is not None:
        if not isinstance(data["cone"], dict) or "type" not in data["cone"]:
            raise ParseError("cone must be an object with a type", _line_of(text, "cone"), "cone")
        cfg.cone = dict(data["cone"])
    if "stop" in data:
        _check_keys(data["stop"], STOP_KEYS, "stop", text)
        if "merit_tol" in data["stop"]:
            cfg.stop["merit_tol"] = _number(data["stop"]["merit_tol"], "stop.merit_tol", text)
        if "max_iters" in data["stop"]:
            cfg.stop["max_iters"] = _number(data["stop"]["max_iters"], "stop.max_iters", text, True)
    if "subproblem" in data:
        _check_keys(data["subproblem"], SUBPROBLEM_KEYS, "subproblem", text)
        sp = data["subproblem"]
        if "dual_gap_tol" in sp:
            cfg.subproblem["dual_gap_tol"] = _number(sp["dual_gap_tol"], "subproblem.dual_gap_tol", text)
        if "dual_max_iters" in sp:
            cfg.subproblem["dual_max_iters"] = _number(
                sp["dual_max_iters"], "subproblem.dual_max_iters", text, True)
    if "output" in data:
        _check_keys(data["output"], OUTPUT_KEYS, "output", text)
        for k, v in data["output"].items():
            if v is not None and not isinstance(v, str):
                raise ParseError(f"output.{k} must be a path or null", _line_of(text, k), f"output.{k}")
            cfg.output[k] = v
    if "certificates" in data and data["certificates"] is not None:
        certs = data["certificates"]
        if not isinstance(certs, list) or not all(isinstance(c, str) for c in certs):
            raise ParseError("certificates must be a list of names", _line_of(text, "certificates"),
                             "certificates")
        cfg.certificates = list(certs)
    if "seed" in data:
        cfg.seed = _number(data["seed"], "seed", text, integer=True)
    if "timing" in data:
        if not isinstance(data["timing"], bool):
            raise ParseError("timing must be true or false", _line_of(text, "timing"), "timing")
        cfg.timing = data["timing"]
    validate(cfg)
    return cfg


def parse_config(text):
    """Parse a JSON document into a validated :class:`RunConfig`.

    Raises
    ------
    ParseError
        Malformed JSON, unknown keys or wrongly typed values, with the line
        and field when they can be located.
    ValidationError
        Semantic problems: ``ell <= 0``, a dimension mismatch, a kernel whose
        domain closure differs from the feasible set, an unknown problem.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, None) from exc
    return config_from_dict(data, text)


def validate(cfg):
    if not cfg.ell > 0 or not np.isfinite(cfg.ell):
        raise ValidationError(f"must be positive, got {cfg.ell}", "ell")
    if not cfg.stop["merit_tol"] >= 0:
        raise ValidationError("must be nonnegative", "stop.merit_tol")
    if cfg.stop["max_iters"] < 0:
        raise ValidationError("must be nonnegative", "stop.max_iters")
    if not cfg.subproblem["dual_gap_tol"] > 0:
        raise ValidationError("must be positive", "subproblem.dual_gap_tol")
    if cfg.subproblem["dual_max_iters"] < 1:
        raise ValidationError("must be at least 1", "subproblem.dual_max_iters")
    if cfg.certificates is not None:
        unknown = sorted(set(cfg.certificates) - set(CERTIFICATES))
        if unknown:
            raise ValidationError(f"unknown certificates {unknown}", "certificates")
    try:
        prob = cfg.build()
    except ValidationError:
        raise
    except BregVOptError as exc:
        raise ValidationError(str(exc), "problem") from exc
    except (ImportError, AttributeError) as exc:
        raise ValidationError(str(exc), "problem") from exc
    if len(cfg.x0) != prob.n:
        raise ValidationError(f"length {len(cfg.x0)} != problem dimension {prob.n}", "x0")
    if not prob.kernel.is_interior(np.asarray(cfg.x0, dtype=float)):
        raise ValidationError("x0 must lie in the interior of the feasible set", "x0")
    return prob


def serialize(cfg):
    """JSON text that :func:`parse_config` maps back to an equal config."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
