"""
Configuration Management for Patient Similarity

Ambient settings (output folders, worker count, log level, default seed)
come from environment variables or a .env file; analysis parameters come
from command-line flags and are collected in a RunConfig.
"""

import os
from dataclasses import dataclass, field
from typing import Optional, Dict, Any
from dotenv import load_dotenv

from .clustering import METHODS
from .distance_matrix import NORMALIZATION_MODES, MetricSpec
from .errors import ParameterError


@dataclass
class StorageConfig:
    """Output locations"""
    output_folder: str = "outputs"
    # empty: a "library" folder inside the run's output directory
    library_folder: str = ""


@dataclass
class ComputeConfig:
    """Defaults for the computation stages"""
    workers: int = 1
    seed: int = 0
    log_level: str = "INFO"


@dataclass
class Config:
    """Main configuration class for the patient similarity tools"""

    service_name: str = "Patient Similarity"
    version: str = "1.0.0"

    storage: StorageConfig = field(default_factory=StorageConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)

    def validate(self) -> tuple:
        """
        Validate configuration.
        Returns: (is_valid: bool, errors: list)
        """
        errors = []

        if self.compute.workers < 1:
            errors.append(f"PS_WORKERS must be >= 1, got {self.compute.workers}")
        if self.compute.log_level.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            errors.append(f"PS_LOG_LEVEL must be a logging level name, got {self.compute.log_level!r}")
        if not self.storage.output_folder:
            errors.append("PS_OUTPUT_FOLDER must not be empty")

        return len(errors) == 0, errors


def _int_env(name: str, default: str) -> int:
    value = os.getenv(name, default)
    try:
        return int(value)
    except ValueError:
        raise ParameterError(f"{name} must be an integer, got {value!r}")


def get_config(env_file: str = None) -> Config:
    """
    Load configuration from environment variables.

    Args:
        env_file: Optional path to .env file

    Returns:
        Config: Populated configuration object
    """
    if env_file:
        load_dotenv(env_file)
    else:
        load_dotenv()

    storage_config = StorageConfig(
        output_folder=os.getenv('PS_OUTPUT_FOLDER', 'outputs'),
        library_folder=os.getenv('PS_LIBRARY_FOLDER', ''),
    )

    compute_config = ComputeConfig(
        workers=_int_env('PS_WORKERS', '1'),
        seed=_int_env('PS_SEED', '0'),
        log_level=os.getenv('PS_LOG_LEVEL', 'INFO'),
    )

    return Config(storage=storage_config, compute=compute_config)


def from_dict(config_dict: Dict[str, Any]) -> Config:
    """
    Create Config from a dictionary.

    Example:
        config = from_dict({
            'storage': {'output_folder': 'results'},
            'compute': {'workers': 4}
        })
    """
    storage_dict = config_dict.get('storage', {})
    storage_config = StorageConfig(**{k: v for k, v in storage_dict.items() if k in StorageConfig.__dataclass_fields__})

    compute_dict = config_dict.get('compute', {})
    compute_config = ComputeConfig(**{k: v for k, v in compute_dict.items() if k in ComputeConfig.__dataclass_fields__})

    return Config(
        service_name=config_dict.get('service_name', 'Patient Similarity'),
        version=config_dict.get('version', '1.0.0'),
        storage=storage_config,
        compute=compute_config,
    )


# ========================================
# Per-run parameters
# ========================================

@dataclass
class RunConfig:
    """Parameters of one dist / cluster / compare / sweep run"""
    input: str = ""
    metric: str = "euclidean"
    p: Optional[float] = None
    q: Optional[int] = None
    normalize: str = "native"
    k: int = 3
    restarts: int = 10
    seed: int = 0
    out: str = "outputs"
    strict: bool = True
    workers: int = 1
    method: str = "kmedoids"

    def metric_spec(self) -> MetricSpec:
        return MetricSpec(self.metric, p=self.p, q=self.q)

    def validate(self) -> tuple:
        """
        Validate run parameters.
        Returns: (is_valid: bool, errors: list)
        """
        errors = []

        try:
            self.metric_spec()
        except ParameterError as e:
            errors.append(e.message)

        if self.normalize not in NORMALIZATION_MODES:
            errors.append(f"normalize must be one of {', '.join(NORMALIZATION_MODES)}, got {self.normalize!r}")
        if self.method not in METHODS:
            errors.append(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.k < 1:
            errors.append(f"k must be >= 1, got {self.k}")
        if self.restarts < 1:
            errors.append(f"restarts must be >= 1, got {self.restarts}")
        if self.workers < 1:
            errors.append(f"workers must be >= 1, got {self.workers}")

        return len(errors) == 0, errors

    def to_dict(self) -> Dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}
