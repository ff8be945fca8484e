__version__ = "0.1"

from . import utils
from . import geometry
from . import stepfn
from . import jordan
from . import convergence
from . import gallery
from . import dsl
from . import algorithms
from . import cli
