"""Cross-patient motor-imagery EEG decoding.

Fourier-reorganized selective state-space encoder plus subject-private
prototype memory for pseudo-label gated adaptation, trained and
evaluated leave-one-subject-out.  Everything runs on a plain CPU in
float64 on top of an in-house tape autodiff.
"""

__version__ = "0.1.0"
