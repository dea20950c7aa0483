"""Multi-perception detection-head blocks with verifiable numerics."""

__version__ = "0.1.0"

from . import numkit  # noqa: E402
from .config import HeadConfig  # noqa: E402
from .errors import ConfigError, NumericError, ShapeError, UsageError  # noqa: E402
from .head import Head, HeadOutput, build_head  # noqa: E402
from .params import ParamStore  # noqa: E402

__all__ = [
    "__version__", "numkit", "HeadConfig", "Head", "HeadOutput", "build_head",
    "ParamStore", "ConfigError", "ShapeError", "UsageError", "NumericError",
]
