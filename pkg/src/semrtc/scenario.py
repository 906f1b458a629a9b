"""Scenario files, sweeps, and deterministic CSV assembly.

A scenario is a flat INI file with sections [link], [controller], [sampler],
[video], [allocator], [run]. Every key is optional and falls back to the
defaults in SessionConfig; unknown keys are rejected so typos surface as
errors instead of silently running the default.
"""
from __future__ import annotations

import concurrent.futures
import configparser
import dataclasses
import os
from dataclasses import dataclass
from typing import Optional

from . import metrics
from .session import ConfigError, RunResult, SessionConfig, run_session

_SECTION_KEYS = {
    "link": {"bandwidth_kbps": float, "one_way_delay_ms": float,
             "loss_rate": float, "loss_model": str, "p_good_to_bad": float,
             "p_bad_to_good": float, "loss_in_bad": float,
             "queue_limit_bytes": int},
    "controller": {"mllm_rate": float, "epsilon": float, "r_max": float,
                   "ewma_alpha": float, "epoch_len_s": float,
                   "adaptive": bool, "fixed_rate_fps": float},
    "sampler": {"substitute_age_limit_intervals": float,
                "suppress_skipped": bool},
    "video": {"bitrate_kbps": float, "frame_bits": float,
              "frame_width": int, "frame_height": int,
              "mtu_payload_bytes": int},
    "allocator": {"correlation_file": str, "uniform_rho": float,
                  "gamma": float, "patch_size": int,
                  "ref_bits_per_patch": float, "ref_qp": int,
                  "halving_step": float},
    "run": {"duration_s": float, "seeds": str, "scenario_id": str},
}

# keys whose config name differs from the SessionConfig attribute
_RENAMES = {("controller", "adaptive"): "adaptive_rate"}

SWEEP_AXES = ("bitrate", "loss", "frame_rate")


@dataclass
class Scenario:
    config: SessionConfig
    seeds: list
    path: Optional[str] = None

    @property
    def scenario_id(self) -> str:
        return self.config.scenario_id


def _parse_bool(raw: str, where: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {raw!r}")


def _parse_value(kind, raw: str, where: str):
    raw = raw.strip()
    if kind is bool:
        return _parse_bool(raw, where)
    if raw.lower() == "none":
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"{where}: expected {kind.__name__}, got {raw!r}") from None


def load_scenario(path: str) -> Scenario:
    if not os.path.exists(path):
        raise ConfigError(f"scenario file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    cfg = SessionConfig()
    seeds = [1]
    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        allowed = _SECTION_KEYS[section]
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            where = f"{path} [{section}] {key}"
            if section == "run" and key == "seeds":
                seeds = _parse_seeds(raw, where)
                continue
            value = _parse_value(allowed[key], raw, where)
            attr = _RENAMES.get((section, key), key)
            setattr(cfg, attr, value)

    if cfg.correlation_file is not None:
        if not os.path.isabs(cfg.correlation_file):
            cfg.correlation_file = os.path.normpath(
                os.path.join(os.path.dirname(os.path.abspath(path)),
                             cfg.correlation_file))
        if not os.path.exists(cfg.correlation_file):
            raise ConfigError(
                f"correlation file not found: {cfg.correlation_file}")
    if cfg.scenario_id == "default" and path is not None:
        cfg.scenario_id = os.path.splitext(os.path.basename(path))[0]
    cfg.validate()
    return Scenario(config=cfg, seeds=seeds, path=path)


def _parse_seeds(raw: str, where: str) -> list:
    parts = [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"{where}: at least one seed required")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{where}: seeds must be integers, got {raw!r}") from None


# ---------------------------------------------------------------------------
# execution

@dataclass(frozen=True)
class RunJob:
    config: SessionConfig
    seed: int
    trace: bool


def _execute(job: RunJob) -> RunResult:
    return run_session(job.config, job.seed, trace_enabled=job.trace)


def expand_runs(scenario: Scenario, trace: bool = False) -> list:
    return [RunJob(config=scenario.config, seed=seed, trace=trace)
            for seed in scenario.seeds]


def expand_sweep(scenario: Scenario, axis: str, values,
                 trace: bool = False) -> list:
    """Cross product of axis values and seeds, stable order: value-major."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; one of {SWEEP_AXES}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    jobs = []
    for value in values:
        cfg = dataclasses.replace(scenario.config)
        if axis == "bitrate":
            if value <= 0:
                raise ConfigError(f"bitrate value must be > 0, got {value}")
            cfg.bitrate_kbps = float(value)
            cfg.frame_bits = None
        elif axis == "loss":
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"loss value must be in [0, 1], got {value}")
            cfg.loss_rate = float(value)
        else:  # frame_rate: pin the sender, bypass the controller
            if value <= 0:
                raise ConfigError(f"frame rate value must be > 0, got {value}")
            cfg.adaptive_rate = False
            cfg.fixed_rate_fps = float(value)
        cfg.scenario_id = f"{scenario.scenario_id}[{axis}={value:g}]"
        for seed in scenario.seeds:
            jobs.append(RunJob(config=cfg, seed=seed, trace=trace))
    return jobs


def run_jobs(jobs, parallel: int = 1) -> list:
    """Execute jobs, preserving job order in the returned results."""
    if parallel <= 1 or len(jobs) <= 1:
        return [_execute(job) for job in jobs]
    workers = min(parallel, len(jobs))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute, jobs))


def results_to_csv(results) -> str:
    lines = [metrics.CSV_HEADER]
    lines.extend(metrics.aggregate(result).csv_row() for result in results)
    return "\n".join(lines) + "\n"


def results_to_trace(results) -> str:
    """Concatenated per-run event traces, in result order."""
    chunks = []
    for result in results:
        if result.trace_lines is None:
            continue
        chunks.append(f"# run {result.scenario_id} seed={result.seed}")
        chunks.extend(result.trace_lines)
    return "\n".join(chunks) + ("\n" if chunks else "")
