"""Run configuration: strict JSON parsing, canonical serialization, digest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .dynamics import EvolutionConfig
from .fock import TwoModeSpace
from .model import ModelParams, StateVector, coherent_state, fock_state

__all__ = ["ConfigError", "InitialState", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


_TOP_KEYS = {"model", "initial_state", "cutoffs", "evolution", "threshold", "output_path"}
_MODEL_KEYS = {"omega", "U", "g", "kappa"}
_EVOLUTION_KEYS = {"dt", "t_max", "sample_stride", "renormalize_each_step"}
_FOCK_KEYS = {"kind", "n_a", "n_b"}
_COHERENT_KEYS = {"kind", "alpha_re", "alpha_im", "mode", "allow_truncation"}


def _check_keys(section: str, data, allowed: set) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")
    return data


def _number(section: str, key: str, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{section}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class InitialState:
    kind: str = "fock"
    n_a: int = 1
    n_b: int = 0
    alpha_re: float = 0.0
    alpha_im: float = 0.0
    mode: str = "a"
    allow_truncation: bool = False

    def build(self, space: TwoModeSpace) -> StateVector:
        if self.kind == "fock":
            return fock_state(space, self.n_a, self.n_b)
        return coherent_state(space, complex(self.alpha_re, self.alpha_im), self.mode,
                              allow_truncation=self.allow_truncation)

    def to_dict(self) -> dict:
        if self.kind == "fock":
            return {"kind": "fock", "n_a": self.n_a, "n_b": self.n_b}
        return {"kind": "coherent", "alpha_re": self.alpha_re, "alpha_im": self.alpha_im,
                "mode": self.mode, "allow_truncation": self.allow_truncation}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = ModelParams()
    initial_state: InitialState = InitialState()
    cutoffs: tuple[int, int] = (4, 4)
    evolution: EvolutionConfig = EvolutionConfig()
    threshold: float = 1e-6
    output_path: str = "witness.csv"

    @property
    def space(self) -> TwoModeSpace:
        return TwoModeSpace(*self.cutoffs)

    def to_dict(self) -> dict:
        m, e = self.model, self.evolution
        return {
            "model": {"omega": m.omega, "U": m.U, "g": m.g, "kappa": m.kappa},
            "initial_state": self.initial_state.to_dict(),
            "cutoffs": list(self.cutoffs),
            "evolution": {"dt": e.dt, "t_max": e.t_max, "sample_stride": e.sample_stride,
                          "renormalize_each_step": e.renormalize_each_step},
            "threshold": self.threshold,
            "output_path": self.output_path,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return "sha256:" + hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        data = _check_keys("config", data, _TOP_KEYS)

        model_in = _check_keys("model", data.get("model", {}), _MODEL_KEYS)
        try:
            model = ModelParams(**{k: _number("model", k, v) for k, v in model_in.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None

        init_in = data.get("initial_state", {"kind": "fock", "n_a": 1, "n_b": 0})
        if not isinstance(init_in, dict):
            raise ConfigError("initial_state: expected a mapping")
        kind = init_in.get("kind", "fock")
        if kind == "fock":
            _check_keys("initial_state", init_in, _FOCK_KEYS)
            init = InitialState(kind="fock",
                                n_a=_number("initial_state", "n_a", init_in.get("n_a", 1), int),
                                n_b=_number("initial_state", "n_b", init_in.get("n_b", 0), int))
        elif kind == "coherent":
            _check_keys("initial_state", init_in, _COHERENT_KEYS)
            mode = init_in.get("mode", "a")
            if mode not in ("a", "b"):
                raise ConfigError(f"initial_state.mode: expected 'a' or 'b', got {mode!r}")
            allow = init_in.get("allow_truncation", False)
            if not isinstance(allow, bool):
                raise ConfigError("initial_state.allow_truncation: expected true/false")
            init = InitialState(kind="coherent",
                                alpha_re=_number("initial_state", "alpha_re", init_in.get("alpha_re", 1.0)),
                                alpha_im=_number("initial_state", "alpha_im", init_in.get("alpha_im", 0.0)),
                                mode=mode, allow_truncation=allow)
        else:
            raise ConfigError(f"initial_state.kind: expected 'fock' or 'coherent', got {kind!r}")

        default_cutoffs = [4, 4] if kind == "fock" else [16, 16]
        cut_in = data.get("cutoffs", default_cutoffs)
        if not isinstance(cut_in, list) or len(cut_in) != 2:
            raise ConfigError("cutoffs: expected a list [cutoff_a, cutoff_b]")
        cutoffs = tuple(_number("cutoffs", str(i), v, int) for i, v in enumerate(cut_in))

        evo_in = _check_keys("evolution", data.get("evolution", {}), _EVOLUTION_KEYS)
        evo_kwargs = {}
        for k, v in evo_in.items():
            if k == "renormalize_each_step":
                if not isinstance(v, bool):
                    raise ConfigError("evolution.renormalize_each_step: expected true/false")
                evo_kwargs[k] = v
            else:
                evo_kwargs[k] = _number("evolution", k, v, int if k == "sample_stride" else float)
        try:
            evolution = EvolutionConfig(**evo_kwargs)
        except ValueError as exc:
            raise ConfigError(f"evolution: {exc}") from None

        threshold = _number("config", "threshold", data.get("threshold", 1e-6))
        if threshold <= 0:
            raise ConfigError("threshold must be positive")
        output_path = data.get("output_path", "witness.csv")
        if not isinstance(output_path, str) or not output_path:
            raise ConfigError("output_path: expected a non-empty string")

        config = cls(model, init, cutoffs, evolution, threshold, output_path)
        try:
            space = config.space
            if not (0 <= init.n_a < space.cutoff_a and 0 <= init.n_b < space.cutoff_b) and kind == "fock":
                raise ConfigError(f"initial Fock state |{init.n_a},{init.n_b}> outside cutoffs {cutoffs}")
            if space.cutoff_a < 2 or space.cutoff_b < 2:
                raise ConfigError("cutoffs must be at least 2")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"cutoffs: {exc}") from None
        return config


def load_config(path) -> RunConfig:
    """Read a JSON run configuration; missing keys take their defaults, unknown keys fail."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return RunConfig.from_dict(data)
