"""Experiment runner: plant + input + observer, with per-step audit columns.

Each logged row ``t >= 1`` describes the state right after the observer has
consumed ``y_t``.  Besides the estimates, every row carries:

``y_identity_resid`` / ``x_identity_resid``
    relative residuals of ``y~_t = phi_t' p~_t + C F^t x~_0`` and
    ``x~_t = S_t p~_t + F^t x~_0`` (should sit at rounding level).
``step_bound_excess``
    ``||p~_t|| - ||p~_{t-1}|| - ||Gamma_{t-1} phi_t W_t C F^t x~_0||``; the
    one-step error bound claims this is <= 0.
``cum_bound_excess``
    ``||p~_t|| - (||p~_0|| + sum_i ||Gamma_{i-1} phi_i W_i C F^i x~_0||)``.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .estimator import EstimatorError
from .filter_bank import build_F
from .excitation import GramAccumulator, classify_excitation, generate_input, pe_metric, pe_trend
from .lti_model import simulate_step
from .observer import OverflowGuardTripped, observer_init, observer_step

NORMALIZE_EPS = 1e-12
# forgetting-variant windup / drift flags used by the comparison report
WINDUP_FACTOR = 1e3
DRIFT_FACTOR = 10.0


@dataclass
class TrajectoryLog:
    """Column-oriented per-step log plus run summary."""

    name: str
    variant: str
    columns: list
    data: np.ndarray  # rows x columns
    summary: dict = field(default_factory=dict)
    records: list | None = None

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def block(self, prefix: str) -> np.ndarray:
        idx = [i for i, c in enumerate(self.columns) if c.startswith(prefix + "_")
               and c[len(prefix) + 1:].isdigit()]
        return self.data[:, idx]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.data:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def summary_text(self) -> str:
        width = max(len(k) for k in self.summary)
        return "".join(f"{k:<{width}}  {_fmt_summary(v)}\n" for k, v in self.summary.items())


def _fmt(v: float) -> str:
    return repr(float(v)) if math.isfinite(v) else str(float(v))


def _fmt_summary(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_summary(x) for x in v) + "]"
    return str(v)


def column_names(cfg: RunConfig) -> list[str]:
    dims = cfg.plant.dims
    cols = ["t"]
    cols += [f"u_{i}" for i in range(dims.m)]
    cols += [f"y_{i}" for i in range(dims.q)]
    cols += [f"y_hat_{i}" for i in range(dims.q)]
    cols += [f"p_hat_{i}" for i in range(dims.d)]
    cols += [f"p_norm_{i}" for i in range(dims.d)]
    cols += ["p_til_norm", "x_til_norm", "lambda_min", "lambda_max", "reset", "pe_metric",
             "y_identity_resid", "x_identity_resid", "step_bound_excess", "cum_bound_excess"]
    return cols


def normalized_estimates(p_hat: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``p_hat / p`` where ``|p| >= 1e-12``; raw error ``p_hat - p`` elsewhere.

    Returns the values and a boolean mask that is True where the raw error
    was used.
    """
    raw = np.abs(p) < NORMALIZE_EPS
    safe = np.where(raw, 1.0, p)
    return np.where(raw, p_hat - p, p_hat / safe), raw


def _norm(a: np.ndarray) -> float:
    """Euclidean (Frobenius for matrices) norm without the np.linalg overhead."""
    v = a.ravel()
    return math.sqrt(v @ v)


def _rel(resid: float, scale: float) -> float:
    return resid / max(scale, 1.0)


def run_experiment(cfg: RunConfig, keep_records: bool = False) -> TrajectoryLog:
    sys = cfg.plant
    dims = sys.dims
    C = sys.C
    p = cfg.true_p
    est_cfg = cfg.estimator
    obs = observer_init(dims, cfg.f_vec, C, est_cfg, cfg.x_hat0, guard=cfg.guard)
    F = obs.filter.F

    columns = column_names(cfg)
    col = {c: i for i, c in enumerate(columns)}
    out = np.empty((cfg.horizon + 1, len(columns)))
    sl_u = slice(col["u_0"], col["u_0"] + dims.m)
    sl_y = slice(col["y_0"], col["y_0"] + dims.q)
    sl_yh = slice(col["y_hat_0"], col["y_hat_0"] + dims.q)
    sl_p = slice(col["p_hat_0"], col["p_hat_0"] + dims.d)
    sl_pn = slice(col["p_norm_0"], col["p_norm_0"] + dims.d)
    sl_tail = slice(col["p_til_norm"], len(columns))
    records = [] if keep_records else None
    gram = GramAccumulator(dims.d)

    x = cfg.x0.copy()
    xi = cfg.x0 - cfg.x_hat0  # F^t x~_0, propagated independently of the observer
    p_til0 = _norm(p - obs.est.p_hat)
    p_til_prev = p_til0
    cum_sum = 0.0
    u = generate_input(cfg.input, 0)
    norm_vals, norm_raw = normalized_estimates(obs.est.p_hat, p)
    p_safe = np.where(norm_raw, 1.0, p)
    guard = cfg.guard

    row = out[0]
    row[0] = 0
    row[sl_u] = u
    row[sl_y] = C @ x
    row[sl_yh] = obs.y_hat
    row[sl_p] = obs.est.p_hat
    row[sl_pn] = norm_vals if cfg.normalize else np.nan
    row[sl_tail] = (p_til0, _norm(x - obs.x_hat), est_cfg.k0, est_cfg.k0, 0, 0.0,
                    0.0, 0.0, 0.0, 0.0)
    n_rows = 1
    truncation = None

    for t in range(cfg.horizon):
        try:
            x_next, y = simulate_step(sys, x, u)
            if not np.abs(x_next).max() < guard:
                raise OverflowGuardTripped(t + 1, "x", float(np.abs(x_next).max()))
            y_next = C @ x_next
            obs, rec = observer_step(obs, y, u, y_next)
        except OverflowGuardTripped as exc:
            truncation = f"overflow_guard:{exc.quantity}@t={exc.t}"
            break
        except EstimatorError as exc:
            truncation = f"estimator_breakdown@t={t + 1}:{exc}"
            break
        x = x_next
        xi = F @ xi
        u = generate_input(cfg.input, t + 1)

        p_hat = rec.p_hat
        p_til_vec = p - p_hat
        p_til = _norm(p_til_vec)
        x_til_vec = x - rec.x_hat
        Cxi = C @ xi
        y_res = _norm(y_next - rec.y_hat - rec.phi.T @ p_til_vec - Cxi)
        y_scale = max(_norm(y_next), _norm(rec.phi) * p_til, _norm(Cxi))
        x_res = _norm(x_til_vec - rec.S @ p_til_vec - xi)
        x_scale = max(_norm(x), _norm(rec.S) * p_til, _norm(xi))
        perturb = _norm(rec.gain @ Cxi)
        cum_sum += perturb
        spec = obs.est.spectrum

        row = out[n_rows]
        row[0] = t + 1
        row[sl_u] = u
        row[sl_y] = y_next
        row[sl_yh] = rec.y_hat
        row[sl_p] = p_hat
        row[sl_pn] = np.where(norm_raw, p_til_vec * -1.0, p_hat / p_safe) if cfg.normalize else np.nan
        row[sl_tail] = (p_til, _norm(x_til_vec), spec[0], spec[1], rec.reset, gram.add(rec.phi),
                        _rel(y_res, y_scale), _rel(x_res, x_scale),
                        p_til - p_til_prev - perturb, p_til - (p_til0 + cum_sum))
        p_til_prev = p_til
        n_rows += 1
        if records is not None:
            records.append(rec)

    data = out[:n_rows]
    body = data[1:]
    pe_hist = body[:, col["pe_metric"]]
    p_block = data[:, sl_p]

    summary = {
        "name": cfg.name,
        "provenance": cfg.provenance,
        "variant": est_cfg.variant,
        "forgetting_factor": est_cfg.forgetting_factor,
        "horizon": cfg.horizon,
        "steps_completed": n_rows - 1,
        "truncated": truncation or "no",
        "reset_count": obs.est.reset_count,
        "final_p_til_norm": float(data[-1, columns.index("p_til_norm")]),
        "final_x_til_norm": float(data[-1, columns.index("x_til_norm")]),
        "p_til0_norm": p_til0,
        "x_til0_norm": float(np.linalg.norm(cfg.x0 - cfg.x_hat0)),
        "max_p_hat_norm": float(np.sqrt((p_block ** 2).sum(axis=1)).max()),
        "max_lambda_max": float(data[:, col["lambda_max"]].max()),
        "min_lambda_min": float(data[:, col["lambda_min"]].min()),
        "pe_metric_final": float(pe_hist[-1]) if pe_hist.size else 0.0,
        "pe_trend": pe_trend(pe_hist),
        "excitation": classify_excitation(pe_hist),
        "max_y_identity_resid": _col_max(body, col["y_identity_resid"]),
        "max_x_identity_resid": _col_max(body, col["x_identity_resid"]),
        "max_step_bound_excess": _col_max(body, col["step_bound_excess"]),
        "max_cum_bound_excess": _col_max(body, col["cum_bound_excess"]),
        "raw_error_components": [int(i) for i in np.flatnonzero(norm_raw)],
    }
    return TrajectoryLog(name=cfg.name, variant=est_cfg.variant, columns=columns,
                         data=data, summary=summary, records=records)


def _col_max(body: np.ndarray, j: int) -> float:
    return float(body[:, j].max()) if body.shape[0] else 0.0


def audit_identities(log: TrajectoryLog, cfg: RunConfig) -> tuple[float, float]:
    """Replay the error decompositions from stored step records.

    Needs a log produced with ``keep_records=True``.  The plant is
    re-simulated and ``F^t x~_0`` is taken from an explicit matrix power, so
    this path shares nothing with the inline residual columns.  Returns the
    worst relative residuals ``(output, state)``.
    """
    if log.records is None:
        raise ValueError("log has no step records; rerun with keep_records=True")
    sys = cfg.plant
    p = cfg.true_p
    F = build_F(cfg.f_vec, sys.dims.q)
    x = cfg.x0.copy()
    x_til0 = cfg.x0 - cfg.x_hat0
    worst_y = worst_x = 0.0
    for rec in log.records:
        x, _ = simulate_step(sys, x, rec.u_prev)
        Ft_xtil = np.linalg.matrix_power(F, rec.t) @ x_til0
        p_til = p - rec.p_hat
        ry = (sys.C @ x - rec.y_hat) - (rec.phi.T @ p_til + sys.C @ Ft_xtil)
        rx = (x - rec.x_hat) - (rec.S @ p_til + Ft_xtil)
        y_scale = max(np.linalg.norm(sys.C @ x), np.linalg.norm(rec.phi) * np.linalg.norm(p_til))
        x_scale = max(np.linalg.norm(x), np.linalg.norm(rec.S) * np.linalg.norm(p_til))
        worst_y = max(worst_y, _rel(np.linalg.norm(ry), y_scale))
        worst_x = max(worst_x, _rel(np.linalg.norm(rx), x_scale))
    return worst_y, worst_x


def write_outputs(log: TrajectoryLog, out_dir, stem: str | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{log.name}_{log.variant}"
    csv_path = out / f"{stem}.csv"
    txt_path = out / f"{stem}_summary.txt"
    csv_path.write_text(log.to_csv())
    txt_path.write_text(log.summary_text())
    return {"csv": csv_path, "summary": txt_path}


@dataclass
class Comparison:
    reset: TrajectoryLog
    forgetting: TrajectoryLog
    table: list  # rows of (metric, reset value, forgetting value)
    forgetting_flagged: bool
    reset_bounded: bool

    def table_text(self) -> str:
        rows = [(name, _fmt_summary(a), _fmt_summary(b)) for name, a, b in self.table]
        rows.append(("forgetting_flagged", "", str(self.forgetting_flagged)))
        rows.append(("reset_bounded", str(self.reset_bounded), ""))
        head = ("metric", "covariance_reset", "forgetting")
        w = [max(len(r[i]) for r in rows + [head]) + 2 for i in range(3)]
        return "".join(f"{a:<{w[0]}}{b:>{w[1]}}{c:>{w[2]}}\n" for a, b, c in [head] + rows)


def compare_estimators(cfg: RunConfig, lam: float | None = None) -> Comparison:
    """Run the covariance-reset estimator and the forgetting baseline side by side.

    The forgetting run is flagged when its covariance winds up past
    ``WINDUP_FACTOR`` times the reset run's peak, its estimates grow past
    ``DRIFT_FACTOR`` times the reset run's peak, or it breaks down.
    """
    lam = cfg.forgetting_lam if lam is None else lam
    reset_log = run_experiment(cfg.with_overrides(variant="covariance_reset"))
    forget_log = run_experiment(cfg.with_overrides(variant="forgetting", lam=lam))
    rs, fs = reset_log.summary, forget_log.summary
    keys = ("steps_completed", "truncated", "reset_count", "max_p_hat_norm", "max_lambda_max",
            "final_p_til_norm", "final_x_til_norm", "pe_metric_final")
    table = [(k, rs[k], fs[k]) for k in keys]
    flagged = (fs["max_lambda_max"] > WINDUP_FACTOR * rs["max_lambda_max"]
               or fs["max_p_hat_norm"] > DRIFT_FACTOR * rs["max_p_hat_norm"]
               or fs["truncated"] != "no")
    bounded = (rs["truncated"] == "no"
               and rs["max_lambda_max"] <= cfg.estimator.k0 * (1 + 1e-10)
               and math.isfinite(rs["max_p_hat_norm"]))
    return Comparison(reset=reset_log, forgetting=forget_log, table=table,
                      forgetting_flagged=bool(flagged), reset_bounded=bool(bounded))
