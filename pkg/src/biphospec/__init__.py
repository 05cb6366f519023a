"""Fisher-information bounds for pulsed biphoton spectroscopy of single molecules.

Subpackages
-----------
probe        time/frequency grids, pulse envelopes, PDC / TFM biphoton states
matter       two-level and coupled-dimer systems, characteristic response functions
scatter      asymptotic light-matter scattering of Schmidt modes
fisher       QFI / CFI quantities, 1-LOCC optimisation, optimal unitaries
gdm          two-sided master-equation engine (independent cross-check)
singlephoton one-photon scattering and modal closed forms
cli          configuration-driven sweep runner
report       heatmap rendering for sweep results
"""

from . import probe, matter, scatter, fisher, gdm, singlephoton

__version__ = "0.1.0"

__all__ = ["probe", "matter", "scatter", "fisher", "gdm", "singlephoton", "__version__"]
