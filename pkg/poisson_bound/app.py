"""
Description: Application layer behind the two entry scripts. run_task dispatches
             bound / wcl_distance / verify, turns every PoissonBoundError into a failed
             Result carrying its exit code, and returns the report.

Changelog:
- 2025-06-18: Initial creation.
- 2025-06-20: verify runs the occupation and return-probability checks for MAP models.
"""

import math
import subprocess
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from config.config import CONFIG
from poisson_bound.core.errors import (
    ConditionViolated, InvalidParameter, ModelFileError, PoissonBoundError, VerificationFailed,
)
from poisson_bound.core.model_file import MAP_GI1, MG1_WCL, ModelFile, load_model_file, parse_model
from poisson_bound.core.report import Report, write_curve_csv, write_terms_csv
from poisson_bound.core.result import Result
from poisson_bound.numerics.grids import parse_grid
from poisson_bound.services import bound_engine, drift_builder
from poisson_bound.services.generators import check_generator_inequality
from poisson_bound.services.regen_sim import (
    QueueModel, WorkloadState, estimate_h, estimate_occupation, estimate_pi_g,
    estimate_return_probability, estimate_wcl_distance,
)
from poisson_bound.services.wcl_distance import WclModel, wcl_distance_bound
from utils.logger_manager import LoggerManager

TASKS = ("bound", "wcl_distance", "verify")


# 每类估计量一个独立子流
STREAM_PI_G, STREAM_H, STREAM_RETURN, STREAM_OCCUPATION, STREAM_DISTANCE = range(5)


def sub_seed(seed: int, stream: int, index: int = 0) -> int:
    """Independent 64-bit seed for the index-th estimator of a stream."""
    state = np.random.SeedSequence([int(seed), int(stream), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


class PoissonBoundApp:
    """Poisson 方程偏差上界工具"""

    def __init__(self, log_level: str = None):
        if log_level:
            LoggerManager.set_log_level(log_level)
        self.logger = LoggerManager.get_logger(__file__)

        try:
            if LoggerManager.get_current_script_env() and not LoggerManager.get_session_dir():
                LoggerManager.create_session_dir()
            if len(sys.argv) > 1:
                self.logger.info(f"执行命令: {subprocess.list2cmdline(sys.argv)}")
        except Exception as e:
            self.logger.warning(f"无法创建会话目录: {e}")

    # ------------------------------------------------------------------
    # 入口
    # ------------------------------------------------------------------

    def run_task(self, task: str, **options) -> Result:
        """
        执行任务
        :param task: bound | wcl_distance | verify
        :param options: model (路径) 或 model_doc (已解析的字典), out, csv, seed, reps, grid,
                        tol, regime, auto
        :return: Result，data 中含 report 与 exit_code
        """
        self.logger.info(f"执行任务: {task}")
        self.logger.debug(f"任务参数: {options}")
        try:
            if task not in TASKS:
                raise InvalidParameter(f"unknown task: {task}", {"tasks": list(TASKS)})
            mf = self._load(options)
            handler = getattr(self, f"cmd_{task}")
            report = handler(mf, options)
        except PoissonBoundError as e:
            self.logger.error(f"{task} 失败 [{e.code}]: {e.message}")
            return Result.error({"exit_code": e.exit_code, "error": e.to_dict()},
                                error=e.message, error_code=e.code)

        self._write(report, options)
        verdict = report.get("verdict")
        if verdict is not None and not verdict["pass"]:
            failed = VerificationFailed("verification failed", {"failed": verdict["failed"]})
            self.logger.error(f"验证未通过: {', '.join(verdict['failed'])}")
            return Result.error({"exit_code": failed.exit_code, "report": report.to_dict()},
                                error=failed.message, error_code=failed.code)
        self.logger.info(f"{task} 完成")
        return Result.success({"exit_code": 0, "report": report.to_dict()})

    def _load(self, options: Dict[str, Any]) -> ModelFile:
        if options.get("model_doc") is not None:
            return parse_model(options["model_doc"])
        if not options.get("model"):
            raise ModelFileError("--model is required")
        return load_model_file(options["model"])

    def _write(self, report: Report, options: Dict[str, Any]):
        report.write(options.get("out"))
        if options.get("csv"):
            if report.get("series") is not None:
                write_terms_csv(report.get("series"), options["csv"])
            else:
                write_curve_csv(report.get("curve") or [], options["csv"],
                                with_phase=report.get("model", {}).get("phases", 1) > 1)
            self.logger.info(f"CSV 已写入: {options['csv']}")

    # ------------------------------------------------------------------
    # 共用步骤
    # ------------------------------------------------------------------

    @staticmethod
    def _echo_options(command: str, mf: ModelFile, options: Dict[str, Any]) -> Dict[str, Any]:
        echoed = {"regime": options.get("regime") or mf.regime, "auto": bool(options.get("auto"))}
        if command in ("bound", "verify"):
            echoed["grid"] = options.get("grid") or CONFIG.get("verify.default_grid", "0:4.5:0.5")
        if command == "wcl_distance":
            echoed["tol"] = float(options.get("tol") or CONFIG.get("wcl.default_tol", 1e-3))
        if command == "verify":
            echoed["reps"] = int(options.get("reps") or CONFIG.get("simulation.default_reps", 10000))
            echoed["seed"] = options.get("seed")
            echoed["tol"] = float(options.get("tol") or CONFIG.get("wcl.default_tol", 1e-3))
        return echoed

    def _certificate(self, mf: ModelFile, regime: str, auto: bool) -> drift_builder.DriftCertificate:
        p, tol = mf.params, mf.tolerances
        if regime == "light":
            theta = p.get("theta")
            if theta is None or auto:
                theta = drift_builder.select_theta(mf.mp, mf.law, p.get("theta_strategy", "max-margin"),
                                                   tol=tol)
            if mf.kind == MAP_GI1:
                return drift_builder.build_map_gi1(mf.mp, mf.law, theta, tol)
            return drift_builder.build_mg1_light(mf.lam, mf.law, theta, tol)
        if mf.kind != MG1_WCL:
            raise ModelFileError("heavy-tail regimes need an mg1_wcl model", {"regime": regime})
        if regime == "moderate":
            return drift_builder.build_mg1_moderate(mf.lam, mf.law, mf.envelope, p.get("eps"), p.get("x0"),
                                                    p.get("rho_tilde"), auto=auto, tol=tol)
        return drift_builder.build_mg1_polynomial(mf.lam, mf.law, mf.envelope, p.get("kappa_tilde"),
                                                  p.get("x0"), p.get("rho_tilde"), auto=auto, tol=tol)

    def _checked_certificate(self, mf: ModelFile, echoed: Dict[str, Any], report: Report):
        cert = self._certificate(mf, echoed["regime"], echoed["auto"])
        check = check_generator_inequality(cert, L=mf.L, tol=mf.tolerances)
        report.add("model", {"kind": mf.kind, "phases": mf.mp.M, "rho": cert.rho,
                             "service": mf.law.to_dict(), "L": mf.L})
        report.add("certificate", {"provenance": f"drift_builder.{cert.regime}", **cert.to_dict()})
        report.add("generator_check", {"provenance": "generator_grid_check", **check.to_dict()})
        if not check.success:
            raise ConditionViolated(check.error, check.data)
        return cert

    def _bounds(self, mf: ModelFile, cert, report: Report) -> bound_engine.BoundReport:
        if cert.small_set_is_atom:
            bound = bound_engine.atom_bound(cert)
            weaker = bound_engine.weaker_bound(cert)
            report.add("witness", None)
            report.add("bound", {"provenance": "atom_bound", **bound.to_dict()})
            report.add("weaker_bound", {"provenance": "weaker_bound", **weaker.to_dict()})
            return bound

        p = mf.params
        if p.get("t0") is not None and p.get("witness_x0") is not None:
            witness = bound_engine.map_gi1_witness(mf.mp, mf.law, cert.i0, p["t0"], p["witness_x0"],
                                                   mf.tolerances)
        else:
            witness = bound_engine.optimize_witness(mf.mp, mf.law, cert.i0,
                                                    bound_engine.witness_grid(mf.law), mf.tolerances)
        bound = bound_engine.general_bound(cert, witness)
        report.add("witness", witness)
        report.add("bound", {"provenance": "general_bound", **bound.to_dict()})

        try:
            special = bound_engine.map_gi1_witness_special(mf.mp, cert.i0)
        except ConditionViolated as e:
            report.add("special_case", {"provenance": "special_case_limit", "holds": False,
                                        "reason": e.message})
        else:
            special_bound = bound_engine.general_bound(cert, special)
            not_worse = special_bound.additive <= bound.additive
            if not not_worse:
                self.logger.warning(f"特例见证比网格见证差: T/ξ {special.ratio:.6g} > {witness.ratio:.6g}")
            report.add("special_case", {"provenance": "special_case_limit", "holds": True,
                                        "witness": special, "bound": special_bound,
                                        "not_worse_than_grid": not_worse})
        return bound

    @staticmethod
    def _grid(echoed: Dict[str, Any]) -> np.ndarray:
        try:
            return parse_grid(echoed["grid"])
        except ValueError as e:
            raise InvalidParameter(str(e), {"grid": echoed["grid"]})

    # ------------------------------------------------------------------
    # 命令
    # ------------------------------------------------------------------

    def cmd_bound(self, mf: ModelFile, options: Dict[str, Any]) -> Report:
        echoed = self._echo_options("bound", mf, options)
        report = Report("bound", mf.raw, echoed)
        cert = self._checked_certificate(mf, echoed, report)
        bound = self._bounds(mf, cert, report)
        rows = bound.curve(self._grid(echoed))
        report.add("curve", [{**row, "provenance": bound.form} for row in rows])
        return report

    def cmd_wcl_distance(self, mf: ModelFile, options: Dict[str, Any]) -> Report:
        if mf.kind != MG1_WCL:
            raise ModelFileError("wcl_distance needs an mg1_wcl model", {"kind": mf.kind})
        echoed = self._echo_options("wcl_distance", mf, options)
        report = Report("wcl_distance", mf.raw, echoed)
        cert = self._checked_certificate(mf, echoed, report)
        distance = wcl_distance_bound(WclModel(mf.lam, mf.law, mf.L), cert, echoed["tol"], mf.tolerances)
        report.add("distance", distance)
        report.add("series", distance.terms)
        return report

    def cmd_verify(self, mf: ModelFile, options: Dict[str, Any]) -> Report:
        echoed = self._echo_options("verify", mf, options)
        seed = echoed["seed"]
        if seed is None:
            raise InvalidParameter("verify needs --seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise InvalidParameter("seed must be an unsigned 64-bit integer", {"seed": seed})
        reps = echoed["reps"]
        report = Report("verify", mf.raw, echoed)
        cert = self._checked_certificate(mf, echoed, report)
        bound = self._bounds(mf, cert, report)
        grid = self._grid(echoed)

        # 有限容量时检验 h_L
        model = QueueModel(mf.mp, mf.law, mf.L, cert.i0)
        reward = cert.reward()
        checks: List[Dict[str, Any]] = []
        pi_g = estimate_pi_g(model, reward, reps, sub_seed(seed, STREAM_PI_G))
        report.add("pi_g", pi_g)

        curve = []
        for k, (x, phase) in enumerate((float(x), i) for x in grid for i in range(mf.mp.M)):
            est = estimate_h(model, reward, WorkloadState(x, phase), reps, pi_g, sub_seed(seed, STREAM_H, k))
            b = bound.evaluate(x, phase)
            margin = b - abs(est.point) - 3.0 * est.std_error
            curve.append({"x": x, "phase": phase, "bound": b, "estimate": est.point,
                          "std_error": est.std_error, "provenance": est.provenance})
            checks.append({"check": "h_bound", "x": x, "phase": phase, "margin": margin})
        report.add("curve", curve)

        witness = bound.witness
        if witness is not None and witness.T is not None:
            self._witness_checks(model, witness, seed, reps, grid, checks)
        if mf.kind == MG1_WCL and math.isfinite(mf.L):
            self._distance_check(mf, cert, echoed, seed, reps, checks, report)

        failed = [f"{c['check']}@{c.get('x', '')},{c.get('phase', '')}" for c in checks if c["margin"] < 0]
        report.add("checks", checks)
        report.add("verdict", {"pass": not failed, "failed": failed, "checks": len(checks)})
        return report

    def _witness_checks(self, model: QueueModel, witness, seed: int, reps: int, grid, checks: List):
        n_ret = int(CONFIG.get("verify.return_reps", 20000))
        for i in range(model.M):
            est = estimate_return_probability(model, i, witness.T, sub_seed(seed, STREAM_RETURN, i), n_ret)
            checks.append({"check": "return_probability", "phase": i, "estimate": est.point,
                           "std_error": est.std_error, "xi_T": witness.xi_T,
                           "margin": est.point + 3.0 * est.std_error - witness.xi_T})

        starts = [WorkloadState(0.0, i) for i in range(model.M) if i != model.i0]
        starts += [WorkloadState(float(x), model.i0) for x in grid if x > 0]
        for k, start in enumerate(starts[:int(CONFIG.get("verify.occupation_starts", 5))]):
            est = estimate_occupation(model, start, reps, sub_seed(seed, STREAM_OCCUPATION, k))
            checks.append({"check": "occupation", "x": start.w, "phase": start.phase,
                           "estimate": est.point, "std_error": est.std_error, "ratio": witness.ratio,
                           "margin": witness.ratio + 3.0 * est.std_error - est.point})

    def _distance_check(self, mf: ModelFile, cert, echoed, seed: int, reps: int, checks: List,
                        report: Report):
        distance = wcl_distance_bound(WclModel(mf.lam, mf.law, mf.L), cert, echoed["tol"], mf.tolerances)
        finite = QueueModel.mg1(mf.lam, mf.law, mf.L)
        est = estimate_wcl_distance(finite, lambda x: float(cert.f(x)),
                                    int(CONFIG.get("simulation.histogram_bins", 40)),
                                    reps, sub_seed(seed, STREAM_DISTANCE))
        report.add("distance", distance)
        report.add("distance_estimate", est)
        checks.append({"check": "wcl_distance", "estimate": est.point, "std_error": est.std_error,
                       "bound": distance.value,
                       "margin": distance.value - abs(est.point) - 3.0 * est.std_error})

    # ------------------------------------------------------------------

    @classmethod
    def from_cli_args(cls):
        """从命令行参数创建实例并执行，按结果退出"""
        from utils.cli import CLIParser

        parsed = CLIParser.parse_args()
        if parsed is None:
            sys.exit(2)
        task, args = parsed
        app = cls(log_level=args.get("log_level"))
        result = app.run_task(task, **args)
        if not result.success:
            print(f"错误 [{result.error_code}]: {result.error}", file=sys.stderr)
        sys.exit(result.data.get("exit_code", 1))
