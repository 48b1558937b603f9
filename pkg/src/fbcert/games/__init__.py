"""Game and variational-inequality instances built on the splitting layer."""

from .pev import *  # noqa: F401,F403
from .pev import __all__ as _pev_all
from .qp import *  # noqa: F401,F403
from .qp import __all__ as _qp_all

__all__ = list(_pev_all) + list(_qp_all)
