from . import integrator
from . import gauge
from . import directional
from . import indefinite
