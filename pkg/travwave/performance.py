"""
收敛监控模块
记录每次 Newton 求解的残差历史，统计迭代次数与二次收敛常数
"""

import logging
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass
class SolveMetrics:
    """单次求解指标"""
    timestamp: float
    duration: float
    label: str
    history: tuple
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def quadratic_constants(history: Sequence[float], floor: float = 1e-300) -> List[float]:
    """r_{n+1}/r_n²，r_n 低于 floor 的步不计"""
    ratios = []
    for prev, cur in zip(history, history[1:]):
        if prev > floor and cur > 0.0:
            ratios.append(cur / prev ** 2)
    return ratios


class ConvergenceMonitor:
    """收敛监控器"""

    def __init__(self, window_size: int = 1000):
        self.window_size = window_size
        self.metrics: deque = deque(maxlen=window_size)
        self.lock = threading.Lock()

        self.solve_counts: Dict[str, int] = defaultdict(int)
        self.failure_counts: Dict[str, int] = defaultdict(int)

    def record_solve(self, label: str, history: Sequence[float], duration: float, converged: bool = True):
        """记录一次求解"""
        with self.lock:
            self.metrics.append(SolveMetrics(
                timestamp=time.time(),
                duration=duration,
                label=label,
                history=tuple(float(r) for r in history),
                converged=converged,
            ))
            self.solve_counts[label] += 1
            if not converged:
                self.failure_counts[label] += 1

    def get_stats(self, label: Optional[str] = None) -> Dict:
        """获取统计信息"""
        with self.lock:
            filtered = [m for m in self.metrics if label is None or m.label == label]
            if not filtered:
                return {"message": "暂无数据" if label is None else f"{label} 暂无数据"}

            iterations = [m.iterations for m in filtered]
            durations = [m.duration for m in filtered]
            constants = [c for m in filtered if m.converged
                         for c in quadratic_constants(m.history[-3:])]
            stats = {
                "total_solves": len(filtered),
                "avg_iterations": sum(iterations) / len(iterations),
                "max_iterations": max(iterations),
                "avg_duration": sum(durations) / len(durations),
                "failure_rate": sum(1 for m in filtered if not m.converged) / len(filtered) * 100,
                "max_quadratic_constant": max(constants) if constants else None,
            }
            if label:
                stats["label"] = label
            return stats

    def reset(self):
        with self.lock:
            self.metrics.clear()
            self.solve_counts.clear()
            self.failure_counts.clear()


# 全局监控器实例
_convergence_monitor: Optional[ConvergenceMonitor] = None
_monitor_lock = threading.Lock()


def get_convergence_monitor() -> ConvergenceMonitor:
    """获取全局收敛监控器"""
    global _convergence_monitor

    with _monitor_lock:
        if _convergence_monitor is None:
            _convergence_monitor = ConvergenceMonitor()
        return _convergence_monitor
