"""Multi-seed experiment runner, comparison tables, k_final x lr sweeps and curves.

Layout of one experiment directory::

    config.txt              key=value settings
    seed<N>_episodes.csv    episode,frame,return,length
    seed<N>_frames.csv      frame,k,D,loss
    seed<N>_eval.csv        episode,return      (evaluation episodes)
    aggregate.csv           algo,env,mean,std,seeds
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .agent import ALGORITHMS, AgentConfig, ConfigError, default_config, train_and_evaluate
from .envs import ENVIRONMENTS
from .replay import NotReadyError

log = logging.getLogger(__name__)

OUT_ENV_VAR = "NROWAN_OUT"
EPISODE_HEADER = ["episode", "frame", "return", "length"]
FRAME_HEADER = ["frame", "k", "D", "loss"]
EVAL_HEADER = ["episode", "return"]
AGGREGATE_HEADER = ["algo", "env", "mean", "std", "seeds"]
LABELS = {"dqn": "DQN", "noisynet": "NoisyNet-DQN", "nrowan": "NROWAN-DQN"}


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV_VAR, "runs"))


@dataclass
class ExperimentConfig:
    algorithm: str
    environment: str
    seeds: list[int]
    out_dir: Path
    overrides: dict = field(default_factory=dict)
    eval_episodes: int = 64

    def validate(self) -> "ExperimentConfig":
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: {self.algorithm!r} not in {ALGORITHMS}")
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"environment: {self.environment!r} not in {sorted(ENVIRONMENTS)}")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.eval_episodes <= 0:
            raise ConfigError("eval_episodes: must be positive")
        self.agent_config()
        return self

    def agent_config(self) -> AgentConfig:
        return default_config(self.algorithm, self.environment, **self.overrides)

    def to_text(self) -> str:
        lines = [
            f"algorithm={self.algorithm}",
            f"environment={self.environment}",
            "seeds=" + ",".join(str(s) for s in self.seeds),
            f"eval_episodes={self.eval_episodes}",
        ]
        agent = self.agent_config()
        for f in fields(AgentConfig):
            if f.name == "algorithm":
                continue
            value = getattr(agent, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, out_dir: Path | None = None) -> "ExperimentConfig":
        values = _parse_settings(text)
        try:
            algorithm = values.pop("algorithm")
            environment = values.pop("environment")
        except KeyError as exc:
            raise ConfigError(f"{exc.args[0]}: missing from config") from None
        seeds = parse_int_list(values.pop("seeds", ""))
        eval_episodes = int(values.pop("eval_episodes", 64))
        types = {f.name: f.type for f in fields(AgentConfig)}
        overrides = {}
        for key, value in values.items():
            if key not in types:
                raise ConfigError(f"{key}: not an agent setting")
            overrides[key] = _coerce(key, value, getattr(AgentConfig, key, None))
        cfg = cls(algorithm, environment, seeds, Path(out_dir or default_out_root()), overrides, eval_episodes)
        return cfg.validate()


def _parse_settings(text: str) -> dict[str, str]:
    values = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {raw!r} is not key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _coerce(key: str, value: str, default):
    try:
        if key == "hidden":
            return tuple(int(v) for v in value.split(",") if v)
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None


def parse_int_list(text: str) -> list[int]:
    """Parse non-negative integers given as ``"0,1,2"``, ``"0-4"`` (inclusive) or a mix."""
    out: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _run_seed(algorithm: str, environment: str, overrides: dict, seed: int, out_dir: str, eval_episodes: int):
    cfg = default_config(algorithm, environment, **overrides)
    metrics = train_and_evaluate(environment, cfg, seed, eval_episodes)
    out = Path(out_dir)
    _write_csv(out / f"seed{seed}_episodes.csv", EPISODE_HEADER, metrics.episodes)
    _write_csv(out / f"seed{seed}_frames.csv", FRAME_HEADER, metrics.frames)
    _write_csv(out / f"seed{seed}_eval.csv", EVAL_HEADER, enumerate(metrics.eval_returns))
    log.info("%s/%s seed %d: %.2f +- %.2f", algorithm, environment, seed, metrics.eval_mean, metrics.eval_std)
    return seed, metrics.eval_mean, metrics.eval_std


def seed_scores(out_dir: Path, seed: int) -> tuple[float, float]:
    """Mean and standard deviation of one seed's evaluation returns, read back from disk."""
    returns = [float(row["return"]) for row in _read_csv(Path(out_dir) / f"seed{seed}_eval.csv")]
    return float(np.mean(returns)), float(np.std(returns))


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Train and evaluate every seed, write per-seed files and ``aggregate.csv``.

    The aggregate mean is the mean of per-seed evaluation means and the
    aggregate std is the mean of per-seed standard deviations.
    """
    config.validate()
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(config.to_text())
    except OSError as exc:
        raise OSError(f"cannot write to output directory {out}: {exc}") from exc

    args = [
        (config.algorithm, config.environment, config.overrides, s, str(out), config.eval_episodes)
        for s in config.seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_run_seed, *zip(*args)))
    else:
        for a in args:
            _run_seed(*a)

    scores = [seed_scores(out, s) for s in config.seeds]
    mean = float(np.mean([m for m, _ in scores]))
    std = float(np.mean([s for _, s in scores]))
    seeds_field = " ".join(str(s) for s in config.seeds)
    _write_csv(out / "aggregate.csv", AGGREGATE_HEADER, [(config.algorithm, config.environment, mean, std, seeds_field)])
    return {"algo": config.algorithm, "env": config.environment, "mean": mean, "std": std,
            "seeds": list(config.seeds), "per_seed": scores}


def read_aggregate(run_dir: Path) -> dict:
    path = Path(run_dir) / "aggregate.csv"
    if not path.exists():
        raise NotReadyError(f"no aggregate results in {run_dir}")
    row = _read_csv(path)[0]
    return {"algo": row["algo"], "env": row["env"], "mean": float(row["mean"]), "std": float(row["std"]),
            "seeds": [int(s) for s in row["seeds"].split()]}


def run_dir(root: Path, algorithm: str, environment: str) -> Path:
    return Path(root) / f"{algorithm}_{environment}"


def compare(root: Path, environment: str, algorithms: Sequence[str] = ALGORITHMS) -> str:
    """Render a mean±std table row per environment and write ``comparison_<env>.csv``.

    The best mean is marked in bold; exact ties are all marked.
    """
    results = [read_aggregate(run_dir(root, algo, environment)) for algo in algorithms]
    best = max(r["mean"] for r in results)
    cells, rows = [], []
    for algo, r in zip(algorithms, results):
        cell = f"{r['mean']:.2f}±{r['std']:.2f}"
        flagged = r["mean"] == best
        cells.append(f"**{cell}**" if flagged else cell)
        rows.append((environment, algo, r["mean"], r["std"], int(flagged)))
    _write_csv(Path(root) / f"comparison_{environment}.csv", ["env", "algo", "mean", "std", "best"], rows)
    header = "| Problem | " + " | ".join(LABELS.get(a, a) for a in algorithms) + " |"
    rule = "|" + "---|" * (len(algorithms) + 1)
    return "\n".join([header, rule, f"| {environment} | " + " | ".join(cells) + " |"])


def sweep(
    k_finals: Sequence[float],
    learning_rates: Sequence[float],
    environment: str,
    seeds: Sequence[int],
    root: Path,
    overrides: dict | None = None,
    jobs: int = 1,
    eval_episodes: int = 64,
) -> list[tuple[float, float, float, float]]:
    """One NROWAN experiment per (k_final, lr) cell; writes ``grid.csv``."""
    if not k_finals or not learning_rates:
        raise ConfigError("sweep: k_final and learning-rate lists must be non-empty")
    root = Path(root)
    grid = []
    for k in k_finals:
        for lr in learning_rates:
            cell_overrides = {**(overrides or {}), "k_final": float(k), "alpha": float(lr)}
            cfg = ExperimentConfig("nrowan", environment, list(seeds), root / f"k{k}_lr{lr}", cell_overrides, eval_episodes)
            agg = run_experiment(cfg, jobs)
            grid.append((float(k), float(lr), agg["mean"], agg["std"]))
    root.mkdir(parents=True, exist_ok=True)
    _write_csv(root / "grid.csv", ["k_final", "lr", "mean", "std"], grid)
    return grid


def trailing_mean(values: Sequence[float], window: int) -> np.ndarray:
    """Mean over each full window of ``window`` consecutive values (length n - window + 1)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    if len(values) < window:
        return np.zeros(0)
    csum = np.cumsum(np.concatenate([[0.0], values]))
    return (csum[window:] - csum[:-window]) / window


def emit_curves(run_dirs: Sequence[Path], out_path: Path, window: int = 10) -> Path:
    """Write smoothed return-vs-frame series (``algo,env,seed,frame,return``) for plotting."""
    rows = []
    for d in map(Path, run_dirs):
        files = sorted(d.glob("seed*_episodes.csv"))
        if not files:
            raise NotReadyError(f"no episode metrics in {d}")
        settings = _parse_settings((d / "config.txt").read_text()) if (d / "config.txt").exists() else {}
        algo, env = settings.get("algorithm", d.name), settings.get("environment", "")
        for path in files:
            seed = int(path.name[len("seed"):-len("_episodes.csv")])
            data = _read_csv(path)
            if not data:
                raise NotReadyError(f"{path} has no episodes")
            returns = [float(r["return"]) for r in data]
            frames = [int(r["frame"]) for r in data]
            smooth = trailing_mean(returns, window)
            for frame, value in zip(frames[window - 1:], smooth):
                rows.append((algo, env, seed, frame, float(value)))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out_path, ["algo", "env", "seed", "frame", "return"], rows)
    return out_path
