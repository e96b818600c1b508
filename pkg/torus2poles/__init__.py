"""torus2poles - class A Lorentz 2-环面 g_f = -f²(x)dt² + dx² 的数值实验室"""

__version__ = "0.1.0"
__author__ = "torus2poles"

from .cli import app

__all__ = ["app"]
