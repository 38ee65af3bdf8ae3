"""EquiMod: equivariance module for augmentation-invariant self-supervised learners."""

try:
    from equimod._equimod import *  # installed wheel layout
    from equimod._equimod import __version__
except ImportError:  # in-tree build: _equimod.so on PYTHONPATH
    from _equimod import *
    from _equimod import __version__
