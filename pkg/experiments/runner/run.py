import os
import sys
import json
import logging
import argparse
from typing import Any, Dict, List, Optional, Tuple

from hedgeprice.census import (
	classify_point_3d,
	count_containing,
	cutting_planes_3d,
	enumerate_cube_simplexes,
	lower_bound_family_general,
)
from hedgeprice.errors import HedgingError, NotInHalfCube
from hedgeprice.market_geometry import MoveSet, Simplex, enumerate_simplexes, risk_neutral_vertex
from hedgeprice.pde import SIDE_MAX, SIDE_MIN, CovarianceFamily, gaussian_limits, gaussian_price, monte_carlo_estimate, solve_bsb
from hedgeprice.pricing import LOWER, UPPER, backward_induction, boyle_sweep, convergence_series, price, verify_superreplication
from hedgeprice.submodular import CubeEmbedding, chi_L, chi_minus, chi_plus

from .common import emit_convergence, emit_grid, emit_rows, run_dir_for, write_reports
from .config import COMMANDS, ExperimentConfig, get_config, reset_config

logger = logging.getLogger(__name__)

DEFAULT_CENSUS_POINTS = [[0.3, 0.4, 0.45], [0.3, 0.2, 0.25], [0.05, 0.1, 0.2], [0.5, 0.5, 0.5]]

Outcome = Tuple[Dict[str, Any], List[str]]


def _price(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	m, p = cfg.move_set.build(), cfg.payoff.build()
	if cfg.side == "both":
		report = price(m, p, cfg.N, cfg.fast_path).to_dict()
	else:
		res = backward_induction(m, p, cfg.N, cfg.side, cfg.fast_path, with_strategy=False)
		report = {
			cfg.side: res.value,
			"n_rounds": cfg.N,
			"fast_path_used": res.fast_path_used,
			"near_tie_nodes": res.near_tie_nodes,
			"layer_structure": list(res.layer_structure),
			"certification_failures": list(res.certification_failures),
		}
	lines = [f"N={cfg.N}"] + [f"{k}: {report[k]:.10f}" for k in (UPPER, LOWER) if k in report]
	return report, lines


def _converge(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	first, last = cfg.n_range or (1, cfg.N)
	m, p = cfg.move_set.build(), cfg.payoff.build()
	series = convergence_series(m, p, list(range(first, last + 1)), cfg.fast_path)
	csv_path = emit_convergence(os.path.join(run_dir, "convergence.csv"), series)
	tail = series[-1]
	lines = [f"N={tail['N']}  upper={tail['upper']:.10f}  lower={tail['lower']:.10f}", f"series: {csv_path}"]
	return {"series": series, "csv": csv_path}, lines


def _limit_pde(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	m, p, g = cfg.move_set.build(), cfg.payoff.build(), cfg.grid.build()
	fam = CovarianceFamily.from_move_set(m)
	sides = {"upper": SIDE_MAX, "lower": SIDE_MIN}
	if cfg.side != "both":
		sides = {cfg.side: sides[cfg.side]}
	result: Dict[str, Any] = {"covariances": [s.tolist() for s in fam.matrices], "ratio": g.ratio}
	lines = [f"grid: ds={g.delta_s} dt={g.delta_t:.6f} M={g.m_cells} ({len(fam)} covariance matrices)"]
	for name, side in sides.items():
		sol = solve_bsb(fam, p, g, side, cfg.grid.record_every, cfg.grid.stencil)
		result[name] = sol.value
		result["stencil"] = sol.stencil
		result[f"{name}_snapshots"] = [
			{"step": k, "value": float(u[g.center])} for k, u in sol.snapshots
		]
		if cfg.output.field_csv:
			result[f"{name}_field_csv"] = emit_grid(os.path.join(run_dir, f"field_{name}.csv"), g.axis, sol.field)
		lines.append(f"{name}: {sol.value:.10f} ({sol.stencil} stencil)")
	return result, lines


def _named_sigma(m: MoveSet, simplex) -> Tuple[List[int], Any]:
	if isinstance(simplex, str):
		emb = CubeEmbedding.from_move_set(m)
		pick = {"chi_L": chi_L, "chi_minus": chi_minus, "chi_plus": chi_plus}[simplex]
		s = pick(emb, m)
	else:
		s = Simplex(tuple(sorted(simplex)))
	return list(s.vertex_indices), risk_neutral_vertex(m, s).sigma


def _limit_gaussian(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	m, p = cfg.move_set.build(), cfg.payoff.build()
	if cfg.simplex is None:
		if cfg.method == "monte_carlo":
			raise SystemExit("Set simplex (chi_L, chi_minus, chi_plus or vertex indices) for Monte Carlo runs")
		rows = gaussian_limits(m, p)
		lines = [f"simplex {r['simplex']}: {r['price']:.10f}" for r in rows]
		return {"limits": rows}, lines
	verts, sigma = _named_sigma(m, cfg.simplex)
	result: Dict[str, Any] = {"simplex": verts, "sigma": sigma.tolist(), "method": cfg.method}
	if cfg.method == "monte_carlo":
		mean, stderr = monte_carlo_estimate(sigma, p, cfg.n_samples, cfg.seed)
		result.update({"price": mean, "stderr": stderr, "n_samples": cfg.n_samples, "seed": cfg.seed})
		lines = [f"simplex {verts}: {mean:.10f} +/- {stderr:.2e} ({cfg.n_samples} samples)"]
	else:
		result["price"] = gaussian_price(sigma, p)
		lines = [f"simplex {verts}: {result['price']:.10f}"]
	return result, lines


def _boyle_sweep(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	m, p = cfg.move_set.build(), cfg.payoff.build()
	rows = boyle_sweep(cfg.rhos, p, cfg.N, m)
	bounds = price(m, p, cfg.N, cfg.fast_path)
	csv_path = emit_rows(os.path.join(run_dir, "boyle.csv"), rows, ["rho", "price"])
	lines = [f"rho={r['rho']:+.1f}: {r['price']:.10f}" for r in rows]
	lines.append(f"hedging bounds at N={cfg.N}: upper={bounds.upper:.10f} lower={bounds.lower:.10f}")
	return {"sweep": rows, "upper": bounds.upper, "lower": bounds.lower, "csv": csv_path}, lines


def _census(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	census = enumerate_cube_simplexes(cfg.d, cfg.threads)
	dump = os.path.join(run_dir, f"census_d{cfg.d}.json")
	with open(dump, "w", encoding="utf-8") as f:
		json.dump(census.to_json(), f, indent=2, sort_keys=True)
		f.write("\n")
	points = cfg.points or (DEFAULT_CENSUS_POINTS if cfg.d == 3 else [])
	queries = []
	for x in points:
		row: Dict[str, Any] = {"x": x, "count": count_containing(x, cfg.d, cfg.threads)}
		if cfg.d == 3:
			row["region"] = classify_point_3d(x)
		try:
			row["lower_bound_family"] = len(lower_bound_family_general(x)) if cfg.d >= 2 else None
		except NotInHalfCube:
			row["lower_bound_family"] = None
		queries.append(row)
	result: Dict[str, Any] = {"d": cfg.d, "count": len(census), "counts_by_type": census.counts_by_type(), "points": queries, "dump": dump}
	lines = [f"d={cfg.d}: {len(census)} full-dimensional simplexes"]
	if cfg.d == 3:
		result["cutting_planes"] = len(cutting_planes_3d())
		types = census.counts_by_type()
		lines.append("types: " + ", ".join(f"{k}={types[k]}" for k in sorted(types)))
		lines.append(f"cutting planes: {result['cutting_planes']}")
	for q in queries:
		region = q.get("region")
		tag = f"  [{region}]" if region else ""
		lines.append(f"|N({', '.join(str(v) for v in q['x'])})| = {q['count']}{tag}")
	return result, lines


def _strategy_verify(cfg: ExperimentConfig, run_dir: str) -> Outcome:
	m, p = cfg.move_set.build(), cfg.payoff.build()
	family = enumerate_simplexes(m)
	result: Dict[str, Any] = {"n_rounds": cfg.N}
	lines = []
	for side in (UPPER, LOWER):
		if cfg.side not in ("both", side):
			continue
		res = backward_induction(m, p, cfg.N, side, cfg.fast_path, family=family)
		slack = verify_superreplication(res.strategy, p, cfg.N)
		result[side] = {"price": res.value, "initial_capital": res.strategy.initial_capital, "worst_slack": slack}
		lines.append(f"{side}: price={res.value:.10f} worst slack={slack:.3e}")
	return result, lines


HANDLERS = {
	"price": _price,
	"converge": _converge,
	"limit-pde": _limit_pde,
	"limit-gaussian": _limit_gaussian,
	"boyle-sweep": _boyle_sweep,
	"census": _census,
	"strategy-verify": _strategy_verify,
}


def run(cfg: ExperimentConfig) -> Tuple[str, List[str]]:
	"""Run one experiment into <output.dir>/<name>/ and return the report path with the summary lines."""
	if cfg.command is None:
		raise SystemExit(f"Name a command ({', '.join(COMMANDS)}) on the command line or in the config")
	cfg.resolve_defaults()
	run_dir = run_dir_for(cfg.output.dir, cfg.name)
	logger.info("running %s [%s] into %s", cfg.command, cfg.name, run_dir)
	result, lines = HANDLERS[cfg.command](cfg, run_dir)
	return write_reports(run_dir, cfg.command, result, cfg.to_safe_dict()), lines


def _print_cli_summary(command: str, name: str, lines: List[str], report_path: str) -> None:
	print(f"\n{command} [{name}]")
	for line in lines:
		print(f"- {line}")
	print(f"Report: {report_path}")


def _error(kind: str, message: str, command: Optional[str]) -> None:
	print(json.dumps({"error": {"type": kind, "message": message, "command": command}}), file=sys.stdout)


def main(argv: Optional[List[str]] = None) -> int:
	ap = argparse.ArgumentParser(prog="python -m experiments.runner.run")
	ap.add_argument("command", nargs="?", choices=COMMANDS, help="Experiment to run (defaults to the config's command)")
	ap.add_argument("--config", help="Path to a JSON (or YAML) experiment config")
	ap.add_argument("--out", help="Output directory (overrides output.dir and HEDGE_OUT_DIR)")
	ap.add_argument("--threads", type=int, help="Worker threads for census enumeration")
	ap.add_argument("--seed", type=int, help="Seed for Monte Carlo runs")
	ap.add_argument("--verbose", action="store_true", help="Log library progress at DEBUG level")
	ap.add_argument("--dry-run", action="store_true", help="Print the resolved config; exit")
	args = ap.parse_args(argv)
	logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

	command = args.command
	try:
		reset_config()
		cfg = get_config(args.config)
		if args.out:
			cfg.output.dir = args.out
		if args.threads is not None:
			cfg.threads = args.threads
		if args.seed is not None:
			cfg.seed = args.seed
		command = command or cfg.command
		if command is None:
			raise SystemExit(f"Name a command ({', '.join(COMMANDS)}) on the command line or in the config")
		cfg.command = command
		if cfg.threads < 1:
			raise SystemExit("--threads must be >= 1")
		cfg.resolve_defaults()
		if args.dry_run:
			print("Effective experiment config:\n")
			print(json.dumps(cfg.to_safe_dict(), indent=2, sort_keys=True))
			return 0
		report_path, lines = run(cfg)
	except SystemExit as e:
		if isinstance(e.code, str):
			print(e.code, file=sys.stderr)
			return 2
		raise
	except HedgingError as e:
		_error(type(e).__name__, str(e), command)
		return 1
	except OSError as e:
		_error("IoError", str(e), command)
		return 1
	_print_cli_summary(command, cfg.name, lines, report_path)
	return 0


if __name__ == "__main__":
	sys.exit(main())
