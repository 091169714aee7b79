"""Overhead depth-map pedestrian localization pipeline.

Submodules:
  depthmap   depth rasters and the min-composition algebra
  patchlib   expert-curated patch store (pedestrian / object / noise)
  augment    seeded patch transformations
  synth      annotated synthetic scene generation
  net        grid detector network (forward, loss, exact gradients, training)
  clusterloc complete-linkage clustering baseline
  evalkit    per-cell precision / recall / IoU evaluation
  service    FastAPI curation facade
  cli        batch entry points (synth / train / eval / localize / serve)
"""

__version__ = "0.1.0"
