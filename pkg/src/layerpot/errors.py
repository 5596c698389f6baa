"""Exception types raised by the layer-potential toolkit."""


class LayerPotError(Exception):
    """Base class for all errors raised by this package."""


class NonConvergence(LayerPotError):
    """Closest-point iteration did not converge (target off the tube or degenerate)."""


class RootRefinementFailure(LayerPotError):
    """A bracketed grid-line root could not be refined; the surface is under-resolved."""


class AllComponentsBelowCutoff(LayerPotError):
    pass


class SingularSystem(LayerPotError):
    pass


class RelationViolated(LayerPotError):
    pass


class PositivityViolated(LayerPotError):
    pass


class OutOfRegion(LayerPotError):
    pass


class EmptySelection(LayerPotError):
    pass


class ConfigError(LayerPotError):
    pass
