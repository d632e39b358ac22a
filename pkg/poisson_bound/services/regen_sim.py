"""
Description: Regenerative Monte Carlo for the MAP/GI/1 and M/GI/1(-WCL) workload
             processes. Paths are event driven: phase clocks from the rows of C and D,
             unit-rate decay with reflection at 0, service draws added at accepted arrivals.
             Rewards are integrated exactly on every decay segment.

             A cycle started in the atom α = (0, i0) includes the initial sojourn in α and
             ends at the next entry into α from outside; started outside α it ends at the
             first hit (τ̃_α).

Changelog:
- 2025-06-08: Initial creation.
- 2025-06-12: Histogram and WCL distance estimators, cycle CSV export.
- 2025-06-15: Replications split into independently seeded blocks on a thread pool.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.config import CONFIG
from poisson_bound.core.errors import ExplodedCycle, InvalidParameter
from poisson_bound.core.report import csv_cell
from poisson_bound.models.map_model import MarkovArrivalProcess, poisson_process
from poisson_bound.models.service_law import ServiceLaw, equilibrium_tables, pk_bin_masses
from poisson_bound.numerics.grids import GridSpec
from poisson_bound.services.rewards import ConstantReward, Reward
from utils.logger_manager import LoggerManager

logger = LoggerManager.get_logger(__file__)

CYCLE = "cycle"
HITTING = "hitting"


# ---------------------------------------------------------------------------
# 模型与随机流
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WorkloadState:
    w: float
    phase: int = 0

    def __post_init__(self):
        if not self.w >= 0.0:
            raise InvalidParameter("workload must be nonnegative", {"w": self.w})


class QueueModel:
    """MAP/GI/1 (L = inf) or M/GI/1 with workload capacity L."""

    def __init__(self, mp: MarkovArrivalProcess, law: Optional[ServiceLaw], L: float = math.inf,
                 i0: int = 0):
        if not L > 0:
            raise InvalidParameter("capacity L must be positive", {"L": L})
        if not 0 <= i0 < mp.M:
            raise InvalidParameter("atom phase out of range", {"i0": i0, "phases": mp.M})
        self.mp = mp
        self.law = law
        self.L = float(L)
        self.i0 = int(i0)
        self.rates = -np.diag(mp.C).astype(float)
        self._events = [self._event_table(i) for i in range(mp.M)]

    def _event_table(self, i: int):
        """Cumulative rates of the events leaving phase i: (cum, target, is_arrival)."""
        C, D = self.mp.C, self.mp.D
        rates, targets, arrivals = [], [], []
        for j in range(self.mp.M):
            if j != i and C[i, j] > 0:
                rates.append(C[i, j]); targets.append(j); arrivals.append(False)
        for j in range(self.mp.M):
            if D[i, j] > 0:
                rates.append(D[i, j]); targets.append(j); arrivals.append(True)
        return np.cumsum(rates), np.asarray(targets), np.asarray(arrivals)

    @classmethod
    def map_gi1(cls, mp: MarkovArrivalProcess, law: ServiceLaw, i0: int = 0) -> "QueueModel":
        return cls(mp, law, math.inf, i0)

    @classmethod
    def mg1(cls, lam: float, law: ServiceLaw, L: float = math.inf) -> "QueueModel":
        return cls(poisson_process(lam), law, L, 0)

    @property
    def M(self) -> int:
        return self.mp.M

    def in_atom(self, state: WorkloadState) -> bool:
        return state.w == 0.0 and state.phase == self.i0

    def next_event(self, phase: int, u: float) -> Tuple[int, bool]:
        cum, targets, arrivals = self._events[phase]
        k = min(int(np.searchsorted(cum, u * cum[-1], side="right")), cum.size - 1)
        return int(targets[k]), bool(arrivals[k])


class RandomStream:
    """Buffered draws from np.random.default_rng([seed, block])."""

    def __init__(self, seed: int, block: int, law: Optional[ServiceLaw], buffer_size: Optional[int] = None):
        self.rng = np.random.default_rng([int(seed), int(block)])
        self.law = law
        self.size = int(buffer_size or CONFIG.get("simulation.buffer_size", 4096))
        self._exp = self._uni = self._svc = None
        self._ie = self._iu = self._is = self.size

    def exponential(self) -> float:
        if self._ie == self.size:
            self._exp, self._ie = self.rng.standard_exponential(self.size), 0
        self._ie += 1
        return float(self._exp[self._ie - 1])

    def uniform(self) -> float:
        if self._iu == self.size:
            self._uni, self._iu = self.rng.random(self.size), 0
        self._iu += 1
        return float(self._uni[self._iu - 1])

    def service(self) -> float:
        if self._is == self.size:
            self._svc, self._is = self.law.sample_block(self.rng, self.size), 0
        self._is += 1
        return float(self._svc[self._is - 1])


# ---------------------------------------------------------------------------
# 单周期
# ---------------------------------------------------------------------------

@dataclass
class CycleRecord:
    tau: float
    g_integral: float
    occupation_C: float
    excursion: float
    hit_alpha_by_T: Optional[bool] = None
    segments: Optional[List[Tuple[float, float]]] = field(default=None, repr=False)


def simulate_cycle(model: QueueModel, start: WorkloadState, reward: Reward, stream: RandomStream,
                   mode: str = CYCLE, record_segments: bool = False,
                   T: Optional[float] = None) -> CycleRecord:
    """One regeneration cycle (mode="cycle") or one path to the first hit of α (mode="hitting").

    record_segments keeps (w_start, duration) of every piece of the path, idle pieces
    with w_start = 0. T, when given, sets hit_alpha_by_T (α entered at some time ≤ T).
    """
    cap = float(CONFIG.get("simulation.cycle_cap", 1e6))
    w, phase = float(start.w), int(start.phase)
    inside = model.in_atom(start)
    if inside and mode == HITTING:
        return CycleRecord(0.0, 0.0, 0.0, 0.0, True if T is not None else None,
                           [] if record_segments else None)

    tau = g_int = occ = sojourn = 0.0
    segments = [] if record_segments else None
    hit_time = None

    while True:
        dt = stream.exponential() / model.rates[phase]
        if w > 0.0:
            d = min(dt, w)
            g_int += reward.decay_integral(w, d, phase)
            if segments is not None:
                segments.append((w, d))
            tau += d
            if dt >= w:
                w = 0.0
                if phase == model.i0:
                    hit_time = tau
                    break
            else:
                w -= d
            dt -= d
        if w == 0.0 and dt > 0.0:
            g_int += reward.idle_integral(dt, phase)
            occ += dt
            if inside:
                sojourn += dt
            if segments is not None:
                segments.append((0.0, dt))
            tau += dt
        if tau > cap:
            raise ExplodedCycle("cycle exceeded the time cap",
                                {"cap": cap, "w": w, "phase": phase})

        target, is_arrival = model.next_event(phase, stream.uniform())
        if is_arrival:
            s = stream.service()
            if w + s <= model.L:
                w += s
        phase = target
        now_inside = w == 0.0 and phase == model.i0
        if inside and not now_inside:
            inside = False
        elif now_inside and not inside:
            hit_time = tau
            break

    hit_by_T = None if T is None else hit_time <= T
    return CycleRecord(tau, g_int, occ, tau - sojourn, hit_by_T, segments)


def state_at(model: QueueModel, start: WorkloadState, T: float, stream: RandomStream) -> WorkloadState:
    """X(T) for a path started at start."""
    w, phase, t = float(start.w), int(start.phase), 0.0
    while True:
        dt = stream.exponential() / model.rates[phase]
        if t + dt >= T:
            return WorkloadState(max(0.0, w - (T - t)), phase)
        t += dt
        w = max(0.0, w - dt)
        target, is_arrival = model.next_event(phase, stream.uniform())
        if is_arrival:
            s = stream.service()
            if w + s <= model.L:
                w += s
        phase = target


# ---------------------------------------------------------------------------
# 估计量
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegenerativeEstimate:
    point: float
    std_error: float
    n: int
    seed: int
    provenance: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out = {"provenance": self.provenance, "point": self.point,
               "std_error": self.std_error, "n": self.n, "seed": self.seed}
        out.update(self.extra)
        return out


def _run_blocks(n: int, seed: int, law: Optional[ServiceLaw], work: Callable[[int, RandomStream], Any]) -> List[Any]:
    """work(count, stream) on every block; results in block order."""
    block_size = int(CONFIG.get("simulation.block_size", 1000))
    counts = [min(block_size, n - start) for start in range(0, n, block_size)]
    max_workers = int(CONFIG.get("search.max_workers", 4))

    def run(block):
        out = work(counts[block], RandomStream(seed, block, law))
        logger.debug(f"模拟块 {block + 1}/{len(counts)} 完成 ({counts[block]} 次)")
        return out

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(run, range(len(counts))))


def _cycles(model: QueueModel, start: WorkloadState, reward: Reward, n: int, seed: int,
            mode: str = CYCLE, record_segments: bool = False) -> List[CycleRecord]:
    blocks = _run_blocks(n, seed, model.law, lambda count, stream: [
        simulate_cycle(model, start, reward, stream, mode, record_segments) for _ in range(count)])
    return [rec for block in blocks for rec in block]


def _check_seed(seed):
    if seed is None or not (isinstance(seed, (int, np.integer)) and 0 <= seed < 2 ** 64):
        raise InvalidParameter("seed must be an unsigned 64-bit integer", {"seed": seed})


def _ratio(num: np.ndarray, den: np.ndarray) -> Tuple[float, float]:
    """Σnum/Σden with the delta-method standard error."""
    n = num.size
    r = float(num.sum() / den.sum())
    if n < 2:
        return r, math.inf
    z = num - r * den
    se = math.sqrt(float(np.var(z, ddof=1)) / n) / float(den.mean())
    return r, se


def estimate_pi_g(model: QueueModel, reward: Reward, n_cycles: int, seed: int) -> RegenerativeEstimate:
    """⟨π, g⟩ = E[∫_0^τ g] / E[τ] over cycles started in the atom."""
    _check_seed(seed)
    if n_cycles < 100:
        raise InvalidParameter("need at least 100 cycles", {"n_cycles": n_cycles})
    records = _cycles(model, WorkloadState(0.0, model.i0), reward, n_cycles, seed)
    g = np.array([r.g_integral for r in records])
    tau = np.array([r.tau for r in records])
    point, se = _ratio(g, tau)
    logger.info(f"⟨π,g⟩ 估计: {point:.6g} ± {se:.3g} ({n_cycles} 个周期)")
    return RegenerativeEstimate(point, se, n_cycles, int(seed), "regenerative_ratio",
                                {"mean_cycle": float(tau.mean())})


def estimate_h(model: QueueModel, reward: Reward, x: WorkloadState, n_reps: int,
               pi_g: RegenerativeEstimate, seed: int) -> RegenerativeEstimate:
    """h(x) = E_x[∫_0^{τ̃_α} (g − ⟨π,g⟩) dt]; zero on the atom."""
    _check_seed(seed)
    if model.in_atom(x):
        return RegenerativeEstimate(0.0, 0.0, n_reps, int(seed), "atom")
    if n_reps < 2:
        raise InvalidParameter("need at least 2 replications", {"n_reps": n_reps})
    records = _cycles(model, x, reward, n_reps, seed, mode=HITTING)
    g = np.array([r.g_integral for r in records])
    tau = np.array([r.tau for r in records])
    y = g - pi_g.point * tau
    point = float(y.mean())
    se = math.sqrt(float(np.var(y, ddof=1)) / n_reps + float(tau.mean()) ** 2 * pi_g.std_error ** 2)
    return RegenerativeEstimate(point, se, n_reps, int(seed), "hitting_time_mean",
                                {"mean_hitting_time": float(tau.mean())})


def estimate_occupation(model: QueueModel, x: WorkloadState, n_reps: int, seed: int,
                        mode: str = CYCLE) -> RegenerativeEstimate:
    """E_x[∫_0^{τ_α} 1_ℂ dt] with ℂ = {0} × phases."""
    _check_seed(seed)
    records = _cycles(model, x, ConstantReward(0.0), n_reps, seed, mode=mode)
    occ = np.array([r.occupation_C for r in records])
    se = math.sqrt(float(np.var(occ, ddof=1)) / n_reps) if n_reps > 1 else math.inf
    return RegenerativeEstimate(float(occ.mean()), se, n_reps, int(seed), "occupation_mean")


def estimate_return_probability(model: QueueModel, phase: int, T: float, seed: int,
                                n: int) -> RegenerativeEstimate:
    """P^T((0, phase), α)."""
    _check_seed(seed)
    if not T >= 0:
        raise InvalidParameter("T must be nonnegative", {"T": T})
    start = WorkloadState(0.0, phase)
    if T == 0:
        p = 1.0 if model.in_atom(start) else 0.0
        return RegenerativeEstimate(p, 0.0, n, int(seed), "return_fraction", {"T": T, "phase": phase})
    blocks = _run_blocks(n, seed, model.law, lambda count, stream: [
        model.in_atom(state_at(model, start, T, stream)) for _ in range(count)])
    hits = np.array([h for block in blocks for h in block], dtype=float)
    p = float(hits.mean())
    return RegenerativeEstimate(p, math.sqrt(p * (1.0 - p) / n), n, int(seed), "return_fraction",
                                {"T": T, "phase": phase})


@dataclass(frozen=True)
class StationaryHistogram:
    """Time-average occupancy: atom mass at w = 0 plus masses of [edges[j], edges[j+1])."""

    edges: np.ndarray
    atom_mass: float
    atom_se: float
    masses: np.ndarray
    std_errors: np.ndarray
    n: int
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {"provenance": "regenerative_histogram", "n": self.n, "seed": self.seed,
                "atom_mass": self.atom_mass, "atom_se": self.atom_se,
                "edges": [float(e) for e in self.edges],
                "masses": self.masses.tolist(), "std_errors": self.std_errors.tolist()}


def _segment_occupancy(segments: Sequence[Tuple[float, float]], edges: np.ndarray) -> Tuple[float, np.ndarray]:
    if not segments:
        return 0.0, np.zeros(edges.size - 1)
    seg = np.asarray(segments, dtype=float)
    hi, d = seg[:, 0], seg[:, 1]
    idle = hi == 0.0
    lo = hi - d
    lo_e, hi_e = edges[:-1], edges[1:]
    overlap = np.clip(np.minimum(hi[~idle, None], hi_e[None, :]) - np.maximum(lo[~idle, None], lo_e[None, :]),
                      0.0, None)
    return float(d[idle].sum()), overlap.sum(axis=0)


def estimate_stationary_histogram(model: QueueModel, edges: Iterable[float], n_cycles: int,
                                  seed: int) -> StationaryHistogram:
    _check_seed(seed)
    edges = np.asarray(list(edges), dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise InvalidParameter("edges must be increasing and start at >= 0")
    records = _cycles(model, WorkloadState(0.0, model.i0), ConstantReward(0.0), n_cycles, seed,
                      record_segments=True)
    tau = np.array([r.tau for r in records])
    idle = np.empty(n_cycles)
    occ = np.empty((n_cycles, edges.size - 1))
    for k, rec in enumerate(records):
        idle[k], occ[k] = _segment_occupancy(rec.segments, edges)
    atom, atom_se = _ratio(idle, tau)
    masses, ses = np.empty(edges.size - 1), np.empty(edges.size - 1)
    for j in range(edges.size - 1):
        masses[j], ses[j] = _ratio(occ[:, j], tau)
    return StationaryHistogram(edges, atom, atom_se, masses, ses, n_cycles, int(seed))


def estimate_wcl_distance(model: QueueModel, gbar: Callable[[float], float], n_bins: int,
                          n_cycles: int, seed: int) -> RegenerativeEstimate:
    """Binned Σ ḡ(left edge)·|π − π_L| with π from the Pollaczek-Khinchine tables.

    ḡ at the left edge of a bin never exceeds its average for nondecreasing ḡ, so the
    binned sum does not overstate the weighted distance.
    """
    if model.M != 1 or math.isinf(model.L):
        raise InvalidParameter("distance estimate needs an M/GI/1 model with finite L")
    lam = float(model.mp.D[0, 0])
    rho = lam * model.law.mean
    edges = np.linspace(0.0, model.L, n_bins + 1)
    hist = estimate_stationary_histogram(model, edges, n_cycles, seed)

    n_max = max(1, math.ceil(math.log(1e-8) / math.log(rho)))
    eq_grid = equilibrium_tables(model.law, n_max, GridSpec(x_hi=model.L, n_points=4097, mode="uniform"),
                                 check_gap=False)
    pk = pk_bin_masses(rho, eq_grid, np.append(edges, math.inf))
    pk_atom = 1.0 - rho
    pk_bins = pk[:-1].copy()
    pk_bins[0] -= pk_atom
    beyond = float(pk[-1])

    weights = np.array([float(gbar(e)) for e in edges[:-1]])
    g_zero = float(gbar(0.0))
    point = g_zero * abs(pk_atom - hist.atom_mass)
    point += float(weights @ np.abs(np.clip(pk_bins, 0.0, None) - hist.masses))
    point += float(gbar(model.L)) * beyond
    se = g_zero * hist.atom_se + float(weights @ hist.std_errors)
    logger.info(f"经验 WCL 距离 L={model.L:g}: {point:.6g} ± {se:.3g}")
    return RegenerativeEstimate(point, se, n_cycles, int(seed), "binned_distance",
                                {"L": model.L, "bins": n_bins, "beyond_L_mass": beyond})


def estimate_arrival_rate(mp: MarkovArrivalProcess, n_cycles: int, seed: int) -> RegenerativeEstimate:
    """Arrivals per unit time over cycles between successive events landing in phase 0."""
    _check_seed(seed)
    model = QueueModel(mp, None, math.inf, 0)

    def work(count, stream):
        out = []
        for _ in range(count):
            phase, t, arrivals = 0, 0.0, 0
            while True:
                t += stream.exponential() / model.rates[phase]
                phase, is_arrival = model.next_event(phase, stream.uniform())
                arrivals += is_arrival
                if phase == 0:
                    break
            out.append((arrivals, t))
        return out

    rows = [row for block in _run_blocks(n_cycles, seed, model.law, work) for row in block]
    counts = np.array([r[0] for r in rows], dtype=float)
    times = np.array([r[1] for r in rows])
    point, se = _ratio(counts, times)
    return RegenerativeEstimate(point, se, n_cycles, int(seed), "arrival_rate")


def write_cycles_csv(records: Iterable[CycleRecord], path: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tau", "g_integral", "occupation_C"])
        for r in records:
            writer.writerow([csv_cell(r.tau), csv_cell(r.g_integral), csv_cell(r.occupation_C)])
