"""
配置管理模块
"""

import json
import logging
import os
from dataclasses import dataclass, fields
from typing import Any, Dict, Optional

import yaml

from .core import ConfigError, PotentialSpec, SolverConfig, TravWaveError
from .dispersion import bifurcation_point

logger = logging.getLogger(__name__)


class Config:
    """默认配置"""

    # 日志配置
    LOG_LEVEL = os.getenv('TRAVWAVE_LOG_LEVEL', 'INFO')

    # 截断与网格
    K = int(os.getenv('TRAVWAVE_K', '12'))
    Y_MAX = float(os.getenv('TRAVWAVE_Y_MAX', '40.0'))
    N_Y = int(os.getenv('TRAVWAVE_N_Y', '4000'))

    # Newton 配置
    TOL_NEWTON = float(os.getenv('TRAVWAVE_TOL_NEWTON', '1e-12'))
    MAX_NEWTON_ITERS = int(os.getenv('TRAVWAVE_MAX_NEWTON_ITERS', '20'))

    # 分支配置
    EPS_MAX = float(os.getenv('TRAVWAVE_EPS_MAX', '0.1'))
    N_BRANCH = int(os.getenv('TRAVWAVE_N_BRANCH', '32'))

    # 并发与扫描
    MAX_WORKERS = int(os.getenv('TRAVWAVE_MAX_WORKERS', '4'))
    LAMBDA_SAMPLES = int(os.getenv('TRAVWAVE_LAMBDA_SAMPLES', '2048'))


class DevelopmentConfig(Config):
    """开发环境配置"""
    LOG_LEVEL = 'DEBUG'


class ProductionConfig(Config):
    """生产环境配置"""
    LOG_LEVEL = 'WARNING'
    MAX_WORKERS = 8


class TestingConfig(Config):
    """测试环境配置"""
    LOG_LEVEL = 'ERROR'
    N_Y = 2000
    N_BRANCH = 16
    MAX_WORKERS = 1
    LAMBDA_SAMPLES = 512


# 配置字典
config_dict = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': Config
}


def get_config(env: Optional[str] = None) -> type:
    """获取配置类"""
    if env is None:
        env = os.getenv('TRAVWAVE_ENV', 'default')

    return config_dict.get(env, Config)


def default_solver_config(env: Optional[str] = None) -> SolverConfig:
    cls = get_config(env)
    return SolverConfig(
        K=cls.K,
        y_max=cls.Y_MAX,
        n_y=cls.N_Y,
        tol_newton=cls.TOL_NEWTON,
        max_newton_iters=cls.MAX_NEWTON_ITERS,
        eps_max=cls.EPS_MAX,
        n_branch=cls.N_BRANCH,
        max_workers=cls.MAX_WORKERS,
    )


def load_config_from_file(config_file: str) -> Dict[str, Any]:
    """从 JSON 或 YAML 文件加载配置"""
    if not os.path.exists(config_file):
        raise ConfigError(f"配置文件不存在: {config_file}")

    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            if config_file.endswith('.json'):
                config = json.load(f)
            elif config_file.endswith('.yaml') or config_file.endswith('.yml'):
                config = yaml.safe_load(f)
            else:
                raise ConfigError(f"不支持的配置文件格式: {config_file}")
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"加载配置文件失败: {e}") from e

    if config is None:
        return {}
    if not isinstance(config, dict):
        raise ConfigError("配置文件顶层必须是映射")
    return config


@dataclass(frozen=True)
class RunConfig:
    """一次运行的完整输入"""
    spec: PotentialSpec
    solver: SolverConfig
    k_star: int
    lambda_star: float


_POTENTIAL_KEYS = {'case', 'alpha', 'beta', 'b', 'gamma', 'gamma_profile', 'mode'}
_BRANCH_KEYS = {'k_star', 'lambda_star'}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


def _section(data: Dict[str, Any], name: str, allowed: set) -> Dict[str, Any]:
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{name}.{unknown[0]}'")
    return section


def parse_run_config(data: Dict[str, Any], env: Optional[str] = None) -> RunConfig:
    """解析配置映射，未知键直接报错"""
    unknown = sorted(set(data) - {'potential', 'solver', 'branch'})
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")

    potential = dict(_section(data, 'potential', _POTENTIAL_KEYS))
    solver = _section(data, 'solver', _SOLVER_KEYS)
    branch = _section(data, 'branch', _BRANCH_KEYS)

    if 'case' not in potential:
        raise ConfigError("missing key 'potential.case'")
    try:
        k_star = int(branch.get('k_star', 1))
        lambda_star = float(branch.get('lambda_star', 0.0))
        base = default_solver_config(env)
        cfg = SolverConfig(**{**{f.name: getattr(base, f.name) for f in fields(SolverConfig)}, **solver})
        profile = tuple(tuple(row) for row in potential.pop('gamma_profile', None) or ())
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration value: {e}") from e

    alpha = potential.pop('alpha', 'auto')
    try:
        spec = PotentialSpec(alpha=1.0 if alpha == 'auto' else float(alpha),
                             gamma_profile=profile, **potential)
    except TravWaveError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid potential: {e}") from e
    if alpha == 'auto':
        _, spec = bifurcation_point(spec, k_star, lambda_star)

    logger.debug(f"运行配置: {spec}, {cfg}, k*={k_star}, λ*={lambda_star}")
    return RunConfig(spec=spec, solver=cfg, k_star=k_star, lambda_star=lambda_star)
