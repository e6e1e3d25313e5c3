"""
工具函数模块
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def run_parallel(func: Callable[[Any], Any], items: Sequence[Any], max_workers: Optional[int] = 4) -> List[Any]:
    """在线程池中逐项执行，结果按输入顺序返回"""
    items = list(items)
    if not items:
        return []
    if max_workers is None or max_workers <= 1 or len(items) == 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(max_workers, len(items))) as executor:
        futures = [executor.submit(func, item) for item in items]
        return [future.result() for future in futures]


def measure_solver_performance(func: Callable) -> Callable:
    """装饰器：记录求解耗时"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        try:
            result = func(*args, **kwargs)
            duration = time.time() - start_time
            logger.info(f"{func.__name__} 耗时: {duration:.3f}秒")
            return result
        except Exception as e:
            duration = time.time() - start_time
            logger.error(f"{func.__name__} 失败，耗时: {duration:.3f}秒，错误: {e}")
            raise
    return wrapper


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """随机性只用于性质检验，求解器本身是确定性的"""
    return np.random.default_rng(seed)


def random_spectrum(K: int, rng: np.random.Generator, scale: float = 1.0, decay: float = 0.0) -> np.ndarray:
    """随机系数 a_k ~ scale·N(0,1)/k^decay"""
    k = np.arange(1, K + 1)
    return scale * rng.standard_normal(K) / k ** decay


def format_float(value: float) -> str:
    """17 位有效数字，往返无损"""
    return f"{float(value):.17g}"
