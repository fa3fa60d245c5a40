"""
svm_service.py

Soft-margin kernel SVM trained by Sequential Minimal Optimization, and
the one-vs-one multiclass decomposition.

Solver: Platt's SMO. The outer loop alternates full sweeps with sweeps
over the non-bound multipliers (0 < alpha < C); a point is examined when
it violates KKT by more than kkt_tolerance. The partner is chosen by the
largest |E1 - E2|, then from the non-bound set from a random start, then
from the whole set from a random start. A full sweep that changes
nothing refits the bias from the alphas (the per-step midpoint rule can
leave it off when both multipliers end on a bound), then ends the run
once KKT holds, or after max_passes_without_progress such sweeps.

The error cache E_i = f(x_i) - y_i is kept for every point and updated
from two kernel rows after each accepted step, so examining a point is
O(1) and a step is O(n).
"""
import logging
import warnings
from collections import OrderedDict
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations
from pathlib import Path

import numpy as np
from tqdm import tqdm

from src.errors import CoverageError, DegenerateProblemError, DimensionError
from src.models.kernel import Kernel
from src.models.sample import ActivityLabel, Partition
from src.models.svm import SVM_FORMAT_VERSION, BinarySvm, MulticlassSvm, PairMachine, SmoConfig
from src.utils.files import read_model, write_model
from src.utils.numeric import SeededRng, apply_kernel, as_vector, kernel_matrix

logger = logging.getLogger(__name__)

_BOUND_SNAP = 1e-8
_DECISION_BATCH = 1024


class KernelRowCache:
    """
    LRU cache of Gram-matrix rows for one binary problem.

    Holds at most cache_bytes worth of rows (never fewer than two, the
    pair a step needs).
    """
    def __init__(self, kernel: Kernel, features: np.ndarray, cache_bytes: int):
        self._kernel = kernel
        self._features = features
        row_bytes = max(1, features.shape[0] * features.itemsize)
        self._capacity = max(2, cache_bytes // row_bytes)
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def row(self, index: int) -> np.ndarray:
        cached = self._rows.get(index)
        if cached is not None:
            self._rows.move_to_end(index)
            self.hits += 1
            return cached
        self.misses += 1
        row = np.asarray(apply_kernel(self._kernel, self._features @ self._features[index]))
        self._rows[index] = row
        if len(self._rows) > self._capacity:
            self._rows.popitem(last=False)
        return row


class _SmoSolver:
    """State of one SMO run; use SvmService.smo_train"""

    def __init__(self, features: np.ndarray, targets: np.ndarray, kernel: Kernel, config: SmoConfig,
                 record_objective: bool):
        self.features = features
        self.targets = targets
        self.kernel = kernel
        self.config = config
        self.C = config.C
        self.tol = config.kkt_tolerance
        self.eps = config.alpha_change_epsilon
        self.size = targets.shape[0]
        self.alphas = np.zeros(self.size)
        self.bias = 0.0
        self.errors = -targets.astype(np.float64)
        self.cache = KernelRowCache(kernel, features, config.cache_bytes)
        self.rng = SeededRng(config.seed)
        self.iterations = 0
        self.trace: list[float] | None = [0.0] if record_objective else None
        self._gram = kernel_matrix(kernel, features, features) if record_objective else None

    def run(self) -> None:
        examine_all = True
        idle_passes = 0
        while self.iterations < self.config.max_iterations:
            if examine_all:
                candidates = range(self.size)
            else:
                candidates = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C)).tolist()
            changed = 0
            for index in candidates:
                changed += self._examine(index)
                if self.iterations >= self.config.max_iterations:
                    break
            if examine_all:
                if changed:
                    idle_passes = 0
                    examine_all = False
                    continue
                self.refit_bias()
                if self.max_violation() <= self.tol:
                    return
                idle_passes += 1
                if idle_passes >= self.config.max_passes_without_progress:
                    return
            elif changed == 0:
                examine_all = True

    def refit_bias(self) -> None:
        """
        Recompute the bias from the current alphas.

        With free multipliers the bias is the mean of y_i - u_i over them;
        otherwise it is the middle of the interval the bounded points allow.
        """
        residual = self.bias - self.errors
        near_zero = self.alphas <= _BOUND_SNAP * self.C
        free = ~near_zero & (self.alphas < self.C * (1.0 - _BOUND_SNAP))
        if free.any():
            bias = float(residual[free].mean())
        else:
            # y = +1 at zero and y = -1 at C bound the bias from below
            from_below = (self.targets > 0) == near_zero
            lower = float(residual[from_below].max(initial=-np.inf))
            upper = float(residual[~from_below].min(initial=np.inf))
            finite = [value for value in (lower, upper) if np.isfinite(value)]
            if not finite:
                return
            bias = 0.5 * (lower + upper) if len(finite) == 2 else finite[0]
        self.errors += bias - self.bias
        self.bias = bias

    def max_violation(self) -> float:
        margins = self.targets * self.errors + 1.0
        return float(_kkt_violations(self.alphas, margins, self.C).max(initial=0.0))

    def _examine(self, i2: int) -> int:
        y2 = self.targets[i2]
        a2 = self.alphas[i2]
        e2 = self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return 0
        non_bound = np.flatnonzero((self.alphas > 0) & (self.alphas < self.C))
        if non_bound.size > 1:
            i1 = int(non_bound[np.argmax(np.abs(self.errors[non_bound] - e2))])
            if self._take_step(i1, i2):
                return 1
        if non_bound.size:
            for i1 in np.roll(non_bound, -self.rng.below(non_bound.size)).tolist():
                if self._take_step(i1, i2):
                    return 1
        for i1 in np.roll(np.arange(self.size), -self.rng.below(self.size)).tolist():
            if self._take_step(i1, i2):
                return 1
        return 0

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        C, eps = self.C, self.eps
        a1, a2 = self.alphas[i1], self.alphas[i2]
        y1, y2 = self.targets[i1], self.targets[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s < 0:
            low, high = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            low, high = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        if high - low <= 0:
            return False

        row1 = self.cache.row(i1)
        row2 = self.cache.row(i2)
        k11, k22, k12 = row1[i1], row2[i2], row1[i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            new_a2 = min(max(a2 + y2 * (e1 - e2) / eta, low), high)
        else:
            # Objective along the constraint line is not concave: take the
            # better end point.
            f1 = y1 * (e1 - self.bias) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 - self.bias) - s * a1 * k12 - a2 * k22
            low1 = a1 + s * (a2 - low)
            high1 = a1 + s * (a2 - high)
            low_obj = low1 * f1 + low * f2 + 0.5 * low1 ** 2 * k11 + 0.5 * low ** 2 * k22 + s * low * low1 * k12
            high_obj = high1 * f1 + high * f2 + 0.5 * high1 ** 2 * k11 + 0.5 * high ** 2 * k22 + s * high * high1 * k12
            if low_obj < high_obj - eps:
                new_a2 = low
            elif low_obj > high_obj + eps:
                new_a2 = high
            else:
                new_a2 = a2

        if new_a2 < _BOUND_SNAP * C:
            new_a2 = 0.0
        elif new_a2 > C * (1.0 - _BOUND_SNAP):
            new_a2 = C
        if abs(new_a2 - a2) < eps * (new_a2 + a2 + eps):
            return False
        new_a1 = a1 + s * (a2 - new_a2)
        if new_a1 < eps * C:
            new_a1 = 0.0
        elif new_a1 > C * (1.0 - eps):
            new_a1 = C

        delta1 = y1 * (new_a1 - a1)
        delta2 = y2 * (new_a2 - a2)
        bias1 = self.bias - e1 - delta1 * k11 - delta2 * k12
        bias2 = self.bias - e2 - delta1 * k12 - delta2 * k22
        if 0 < new_a1 < C:
            new_bias = bias1
        elif 0 < new_a2 < C:
            new_bias = bias2
        else:
            new_bias = 0.5 * (bias1 + bias2)

        self.errors += delta1 * row1 + delta2 * row2 + (new_bias - self.bias)
        self.alphas[i1] = new_a1
        self.alphas[i2] = new_a2
        self.bias = new_bias
        self.iterations += 1

        assert 0 <= new_a1 <= C and 0 <= new_a2 <= C
        assert abs(float(self.alphas @ self.targets)) <= 1e-8 * (float(self.alphas.sum()) + 1.0)
        if self.trace is not None:
            self.trace.append(dual_objective(self.alphas, self.targets, self._gram))
        return True

    def objective(self) -> float:
        # sum(alpha) - 1/2 sum_i alpha_i y_i (f_i - bias), with f_i = E_i + y_i
        signed = self.alphas * self.targets
        return float(self.alphas.sum() - 0.5 * signed @ (self.errors + self.targets - self.bias))


def dual_objective(alphas: np.ndarray, targets: np.ndarray, gram: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 1/2 (alpha*y)^T K (alpha*y)"""
    signed = alphas * targets
    return float(alphas.sum() - 0.5 * signed @ gram @ signed)


def _kkt_violations(alphas: np.ndarray, margins: np.ndarray, C: float) -> np.ndarray:
    """
    Per-point KKT violation given y_i f(x_i).

    alpha = 0      needs y f >= 1
    0 < alpha < C  needs y f == 1
    alpha = C      needs y f <= 1
    """
    at_zero = alphas <= 0
    at_bound = alphas >= C
    free = ~(at_zero | at_bound)
    violations = np.zeros_like(margins)
    violations[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    violations[free] = np.abs(margins[free] - 1.0)
    violations[at_bound] = np.maximum(0.0, margins[at_bound] - 1.0)
    return violations


def _train_pair(job: tuple) -> PairMachine:
    class_a, class_b, features, targets, kernel, config = job
    model = svm_service.smo_train(features, targets, kernel, config)
    return PairMachine(class_a=class_a, class_b=class_b, model=model)


class SvmService:
    """
    SvmService Class

    Each binary SMO run is single-threaded and deterministic; the
    pairwise runs of ovo_train may go to a process pool.
    """

    def smo_train(self, features: np.ndarray, targets: np.ndarray, kernel: Kernel, config: SmoConfig,
                  record_objective: bool = False) -> BinarySvm:
        """
        Approximately maximize the SVM dual.

        Args:
            features: (n, d) training vectors
            targets: (n,) labels in {-1, +1}
            kernel: Kernel specification
            config: Solver settings
            record_objective: Keep the dual objective after every accepted
                step (O(n^2) memory, for small problems)

        Returns:
            The machine; converged is False when the iteration cap or the
            idle-sweep cap ended the run with KKT still violated

        Raises:
            DegenerateProblemError: fewer than two samples or a single label
        """
        features = np.atleast_2d(as_vector(features))
        targets = np.asarray(targets, dtype=np.int64)
        if features.shape[0] != targets.shape[0]:
            raise DimensionError(f"{features.shape[0]} vectors but {targets.shape[0]} labels")
        if targets.shape[0] < 2 or not np.isin(targets, (-1, 1)).all():
            raise DegenerateProblemError("SMO needs at least two samples labelled -1 or +1")
        if np.unique(targets).size < 2:
            raise DegenerateProblemError("SMO needs both labels present")

        solver = _SmoSolver(features, targets, kernel, config, record_objective)
        solver.run()
        solver.refit_bias()

        keep = np.flatnonzero(solver.alphas > config.alpha_change_epsilon)
        full_alphas = np.where(solver.alphas > config.alpha_change_epsilon, solver.alphas, 0.0)
        model = BinarySvm(
            kernel=kernel,
            C=config.C,
            support_vectors=features[keep],
            support_labels=targets[keep],
            support_indices=keep,
            alphas=solver.alphas[keep],
            bias=solver.bias,
            iterations=solver.iterations,
            dual_objective=solver.objective(),
            objective_trace=solver.trace or [],
            feature_count=features.shape[1],
        )
        margins = targets * self.decision_batch(model, features)
        violation = float(_kkt_violations(full_alphas, margins, config.C).max(initial=0.0))
        converged = violation <= config.kkt_tolerance
        if not converged:
            message = (f"SMO stopped after {solver.iterations} updates with KKT violation "
                       f"{violation:.3g} > {config.kkt_tolerance:g}")
            logger.warning(message)
            warnings.warn(message, RuntimeWarning, stacklevel=2)
        logger.debug("SMO: %d updates, %d support vectors, cache hits %d / misses %d",
                     solver.iterations, keep.size, solver.cache.hits, solver.cache.misses)
        return model.model_copy(update={'converged': converged, 'max_kkt_violation': violation})

    def decision(self, model: BinarySvm, x) -> float:
        """f(x) = sum_i alpha_i y_i k(sv_i, x) + bias"""
        x = as_vector(x)
        if x.ndim != 1:
            raise DimensionError(f"expected one vector, got shape {x.shape}")
        return float(self.decision_batch(model, x[None, :])[0])

    def decision_batch(self, model: BinarySvm, queries: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(as_vector(queries))
        if model.dimension and queries.shape[1] != model.dimension:
            raise DimensionError(f"query has {queries.shape[1]} features, model expects {model.dimension}")
        if model.alphas.size == 0:
            return np.full(queries.shape[0], model.bias)
        weights = model.alphas * model.support_labels
        values = np.empty(queries.shape[0])
        for start in range(0, queries.shape[0], _DECISION_BATCH):
            block = kernel_matrix(model.kernel, queries[start:start + _DECISION_BATCH], model.support_vectors)
            values[start:start + _DECISION_BATCH] = block @ weights + model.bias
        return values

    def kkt_report(self, model: BinarySvm, features: np.ndarray, targets: np.ndarray) -> float:
        """
        Largest KKT violation of model over the set it was trained on.

        Points outside the stored support set count as alpha = 0.
        """
        features = np.atleast_2d(as_vector(features))
        targets = np.asarray(targets, dtype=np.float64)
        alphas = np.zeros(targets.shape[0])
        alphas[model.support_indices] = model.alphas
        margins = targets * self.decision_batch(model, features)
        return float(_kkt_violations(alphas, margins, model.C).max(initial=0.0))

    def ovo_train(self, train: Partition, kernel: Kernel, config: SmoConfig,
                  classes: Sequence[ActivityLabel] | None = None, workers: int = 1,
                  show_progress: bool = False) -> MulticlassSvm:
        """
        One binary machine per unordered class pair.

        Each machine sees only the rows of its two classes; the smaller
        label code is the -1 side. Pairs with a class missing from train
        are skipped with a warning.

        Args:
            train: Training rows
            kernel: Kernel for every machine
            config: Solver settings for every machine
            classes: Classes to pair up; defaults to the labels in train
            workers: Process count for the pairwise runs (1 = in-process)

        Raises:
            CoverageError: fewer than two classes present, or no pair trainable
        """
        present = sorted(set(train.labels.tolist()))
        if len(present) < 2:
            raise CoverageError("one-vs-one training needs at least two classes")
        wanted = sorted(int(label) for label in classes) if classes is not None else present

        jobs = []
        for code_a, code_b in combinations(wanted, 2):
            if code_a not in present or code_b not in present:
                message = f"skipping pair ({ActivityLabel(code_a).name}, {ActivityLabel(code_b).name}): class absent"
                logger.warning(message)
                warnings.warn(message, RuntimeWarning, stacklevel=2)
                continue
            rows = np.flatnonzero(np.isin(train.labels, (code_a, code_b)))
            targets = np.where(train.labels[rows] == code_a, -1, 1)
            jobs.append((ActivityLabel(code_a), ActivityLabel(code_b), train.features[rows], targets, kernel, config))
        if not jobs:
            raise CoverageError("no class pair has training data")

        logger.info("Training %d pairwise %s machines", len(jobs), kernel.describe())
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                machines = list(tqdm(pool.map(_train_pair, jobs), total=len(jobs),
                                     desc=f'svm {kernel.tag}', disable=not show_progress))
        else:
            machines = [_train_pair(job) for job in tqdm(jobs, desc=f'svm {kernel.tag}', disable=not show_progress)]
        return MulticlassSvm(kernel=kernel, config=config, machines=machines)

    def ovo_predict(self, model: MulticlassSvm, x) -> ActivityLabel:
        x = as_vector(x)
        if x.ndim != 1:
            raise DimensionError(f"expected one vector, got shape {x.shape}")
        return ActivityLabel(int(self.ovo_predict_batch(model, x[None, :])[0]))

    def ovo_predict_batch(self, model: MulticlassSvm, queries: np.ndarray) -> np.ndarray:
        """
        Vote over the pairwise machines.

        A machine votes class_b when its decision is > 0, else class_a.
        Vote ties go to the tied class with the larger sum of |decision|
        over the machines it won against other tied classes; remaining
        ties go to the smaller code. Machines are visited in pair order,
        so the input order of model.machines does not matter.
        """
        queries = np.atleast_2d(as_vector(queries))
        machines = sorted(model.machines, key=lambda m: (int(m.class_a), int(m.class_b)))
        decisions = np.column_stack([self.decision_batch(m.model, queries) for m in machines])
        pairs = [(int(m.class_a), int(m.class_b)) for m in machines]
        winners = np.where(decisions > 0, [b for _, b in pairs], [a for a, _ in pairs])
        predictions = np.empty(queries.shape[0], dtype=np.int64)
        for row in range(queries.shape[0]):
            predictions[row] = self._resolve_votes(pairs, winners[row], decisions[row])
        return predictions

    def save(self, model: MulticlassSvm, path: Path) -> Path:
        return write_model(model, path)

    def load(self, path: Path) -> MulticlassSvm:
        return read_model(MulticlassSvm, path, SVM_FORMAT_VERSION)

    def _resolve_votes(self, pairs: list[tuple[int, int]], winners: np.ndarray, decisions: np.ndarray) -> int:
        votes: dict[int, int] = {}
        for a, b in pairs:
            votes.setdefault(a, 0)
            votes.setdefault(b, 0)
        for winner in winners.tolist():
            votes[winner] += 1
        top = max(votes.values())
        tied = sorted(code for code, count in votes.items() if count == top)
        if len(tied) == 1:
            return tied[0]
        strength = {code: 0.0 for code in tied}
        for (a, b), winner, value in zip(pairs, winners.tolist(), decisions.tolist()):
            if a in strength and b in strength:
                strength[winner] += abs(value)
        return min(tied, key=lambda code: (-strength[code], code))


# Create a singleton instance that will be used throughout the application
svm_service = SvmService()
