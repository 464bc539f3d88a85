import os
import csv
import json
from typing import Any, Dict, List, Sequence

import numpy as np


def ensure_dirs(*paths: str) -> None:
	for p in paths:
		os.makedirs(p, exist_ok=True)


def run_dir_for(base: str, name: str) -> str:
	# Named after the experiment so reruns overwrite byte-identically.
	run_dir = os.path.join(base, name)
	ensure_dirs(run_dir)
	return run_dir


def write_reports(run_dir: str, command: str, result: Dict[str, Any], config: Dict[str, Any]) -> str:
	path = os.path.join(run_dir, "report.json")
	with open(path, "w", encoding="utf-8") as f:
		json.dump({"command": command, "config": config, "result": result}, f, indent=2, sort_keys=True)
		f.write("\n")
	return path


def _fmt(value: Any) -> Any:
	if isinstance(value, (float, np.floating)):
		# Adding 0.0 turns -0.0 (and negatives that round to it) into 0.0.
		return f"{round(float(value), 10) + 0.0:.10f}"
	return value


def emit_rows(path: str, rows: List[Dict[str, Any]], keys: Sequence[str]) -> str:
	with open(path, "w", newline="", encoding="utf-8") as f:
		w = csv.DictWriter(f, fieldnames=list(keys))
		w.writeheader()
		for r in rows:
			w.writerow({k: _fmt(r.get(k)) for k in keys})
	return path


def emit_convergence(path: str, series: List[Dict[str, Any]]) -> str:
	"""N, upper, lower, fast_path_used with fixed 10-digit decimals."""
	if not series:
		raise ValueError("convergence series is empty")
	return emit_rows(path, series, ["N", "upper", "lower", "fast_path_used"])


def emit_grid(path: str, axis: np.ndarray, field: np.ndarray) -> str:
	# One row per grid point: s1, s2, u
	rows = []
	for i, x in enumerate(axis):
		for j, y in enumerate(axis):
			rows.append({"s1": float(x), "s2": float(y), "u": float(field[i, j])})
	return emit_rows(path, rows, ["s1", "s2", "u"])
