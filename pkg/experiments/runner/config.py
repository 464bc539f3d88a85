import os
import json
import typing as t

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from hedgeprice.config import DEFAULT_DELTA_S, DEFAULT_K_STEPS, DEFAULT_M_CELLS, DEFAULT_MC_SAMPLES, DEFAULT_THREADS
from hedgeprice.market_geometry import MoveSet, build_move_set, move_set_preset
from hedgeprice.payoffs import SCALING_NONE, SCALING_SQRT_N, Payoff, make_payoff
from hedgeprice.pde import STENCIL_AUTO, Grid


COMMANDS = ("price", "converge", "limit-pde", "limit-gaussian", "boyle-sweep", "census", "strategy-verify")
DEFAULT_OUT_DIR = "experiments/reports"
# Convergence studies price F(S_N / sqrt(N)); single games price F(S_N).
SQRT_N_COMMANDS = ("converge",)


class _Spec(BaseModel):
	model_config = ConfigDict(extra="forbid")


class MoveSetSpec(_Spec):
	preset: t.Optional[str] = None
	points: t.Optional[t.List[t.List[t.Union[int, float, str]]]] = None

	@model_validator(mode="after")
	def _one_source(self) -> "MoveSetSpec":
		if (self.preset is None) == (self.points is None):
			raise ValueError("give exactly one of move_set.preset or move_set.points")
		return self

	def build(self) -> MoveSet:
		if self.preset is not None:
			return move_set_preset(self.preset)
		return build_move_set(self.points)


class PayoffSpec(_Spec):
	kind: str = "max_option"
	params: t.Dict[str, t.Any] = Field(default_factory=lambda: {"K": 1})
	scaling: t.Optional[t.Literal["none", "sqrt_n"]] = None
	declared_structure: t.Optional[t.List[str]] = None
	negate: bool = False
	shift: float = 0.0

	def build(self) -> Payoff:
		p = make_payoff(self.kind, self.params, self.scaling or SCALING_NONE, self.declared_structure)
		if self.negate:
			p = p.negated()
		if self.shift:
			p = p.shifted(self.shift)
		return p


class GridSpec(_Spec):
	delta_s: float = DEFAULT_DELTA_S
	k_steps: int = DEFAULT_K_STEPS
	m_cells: int = DEFAULT_M_CELLS
	record_every: int = 0
	stencil: t.Literal["auto", "cross", "directional"] = STENCIL_AUTO

	def build(self) -> Grid:
		return Grid(delta_s=self.delta_s, k_steps=self.k_steps, m_cells=self.m_cells)


class OutputSpec(_Spec):
	dir: str = DEFAULT_OUT_DIR
	field_csv: bool = False


class ExperimentConfig(_Spec):
	name: str = "experiment"
	command: t.Optional[t.Literal["price", "converge", "limit-pde", "limit-gaussian", "boyle-sweep", "census", "strategy-verify"]] = None
	move_set: MoveSetSpec = Field(default_factory=lambda: MoveSetSpec(preset="chi1"))
	payoff: PayoffSpec = Field(default_factory=PayoffSpec)
	N: int = 20
	n_range: t.Optional[t.Tuple[int, int]] = None
	side: t.Literal["upper", "lower", "both"] = "both"
	fast_path: t.Literal["auto", "off"] = "auto"
	grid: GridSpec = Field(default_factory=GridSpec)
	rhos: t.List[float] = Field(default_factory=lambda: [round(-1.0 + 0.2 * k, 1) for k in range(11)])
	simplex: t.Optional[t.Union[t.Literal["chi_L", "chi_minus", "chi_plus"], t.List[int]]] = None
	method: t.Literal["quadrature", "monte_carlo"] = "quadrature"
	n_samples: int = DEFAULT_MC_SAMPLES
	d: int = 3
	points: t.List[t.List[t.Union[int, float, str]]] = Field(default_factory=list)
	seed: int = 0
	threads: int = DEFAULT_THREADS
	output: OutputSpec = Field(default_factory=OutputSpec)

	def resolve_defaults(self) -> None:
		if self.payoff.scaling is None:
			self.payoff.scaling = SCALING_SQRT_N if self.command in SQRT_N_COMMANDS else SCALING_NONE

	def to_safe_dict(self) -> dict:
		# Echoed into every report
		return json.loads(json.dumps(self.model_dump(mode="json")))


_CFG_CACHE: t.Optional[ExperimentConfig] = None


def _apply_env_overrides(raw: dict) -> None:
	load_dotenv()
	out = os.getenv("HEDGE_OUT_DIR")
	if out:
		raw.setdefault("output", {})["dir"] = out


def _validate(cfg: ExperimentConfig) -> None:
	if cfg.N < 1:
		raise SystemExit("Set N >= 1 in the experiment config")
	if cfg.n_range is not None and not (1 <= cfg.n_range[0] <= cfg.n_range[1]):
		raise SystemExit("Set n_range to [first, last] with 1 <= first <= last")
	if cfg.threads < 1:
		raise SystemExit("Set threads >= 1 (or pass --threads)")
	if cfg.n_samples < 2:
		raise SystemExit("Set n_samples >= 2 for Monte Carlo")
	if cfg.grid.record_every < 0:
		raise SystemExit("Set grid.record_every >= 0 (0 keeps no snapshots)")


def build_config(raw: t.Optional[dict] = None) -> ExperimentConfig:
	raw = dict(raw or {})
	_apply_env_overrides(raw)
	try:
		cfg = ExperimentConfig.model_validate(raw)
	except ValidationError as e:
		problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors())
		raise SystemExit(f"Invalid experiment config ({problems}). See experiments/config/schema.md")
	_validate(cfg)
	return cfg


def load_config(path: str) -> ExperimentConfig:
	try:
		with open(path, "r", encoding="utf-8") as f:
			raw = yaml.safe_load(f)
	except FileNotFoundError:
		raise SystemExit(
			f"Config file not found at {path}. Create it (see experiments/config/schema.md) or start from a minimal one, e.g.:\n"
			'{"name": "max_chi1", "command": "converge", "move_set": {"preset": "chi1"}, '
			'"payoff": {"kind": "max_option", "params": {"K": 1}, "scaling": "sqrt_n"}, "n_range": [1, 20]}'
		)
	except yaml.YAMLError as e:
		raise SystemExit(f"Config file {path} is not valid JSON/YAML: {e}")
	if raw is not None and not isinstance(raw, dict):
		raise SystemExit(f"Config file {path} must hold a single JSON object")
	return build_config(raw)


def get_config(path: t.Optional[str] = None) -> ExperimentConfig:
	global _CFG_CACHE
	if _CFG_CACHE is None:
		_CFG_CACHE = load_config(path) if path else build_config()
	return _CFG_CACHE


def reset_config() -> None:
	global _CFG_CACHE
	_CFG_CACHE = None
