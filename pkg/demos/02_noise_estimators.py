"""
Which estimator recovers a noisy annotation?
============================================

Many annotators mark the same landmark. Depending on how they err, a
different location estimate gets closest to the truth:

* Gaussian or Poisson jitter: the mean.
* Salt-and-pepper slips (a large jump along one axis): the median.
* Random impulses (a click anywhere on the face): the mode.
"""

import numpy as np

from landmark_stab.noise import (
    NoiseSpec,
    estimator_mean,
    estimator_median,
    estimator_mode,
    inject,
    zero_mean_test,
)
from landmark_stab.synthetic import template_landmarks

face = template_landmarks()
eye = 36  # outer corner of the right eye, 0-based

# Every annotator adds 1 px of ordinary jitter before any larger slip.
careful = NoiseSpec("gaussian", sigma=0.01)
slips = {
    "gaussian": NoiseSpec("gaussian", sigma=0.03),
    "salt_pepper": NoiseSpec("salt_pepper", p=0.2, amplitude=0.2),
    "random_impulse": NoiseSpec("random_impulse", p=0.3),
}

seeds = np.random.SeedSequence(42).spawn(400)
for kind, spec in slips.items():
    samples = []
    for k in range(200):
        a = int(seeds[2 * k].generate_state(1)[0])
        b = int(seeds[2 * k + 1].generate_state(1)[0])
        base = inject(face, careful.with_seed(a)).points
        samples.append(inject(base, spec.with_seed(b)))
    truth = face.points[eye]
    errors = {
        "mean": estimator_mean(samples, eye),
        "median": estimator_median(samples, eye),
        "mode": estimator_mode(samples, eye, bin_width=2.0),
    }
    row = "  ".join(f"{k} {np.hypot(*(np.array(v) - truth)):6.3f} px" for k, v in errors.items())
    print(f"{kind:15s} {row}")

# Bernoulli noise drops annotations instead of moving them; the mask says
# which survived and the mean skips the rest.
dropped = inject(face, NoiseSpec("bernoulli", p=0.3, seed=1))
print(f"\nbernoulli: {int((~dropped.mask).sum())} of 68 landmarks missing")

# Is a set of differences centred on zero?
diffs = [inject(face, NoiseSpec("gaussian", sigma=0.02, seed=s)).points.points[eye] - face.points[eye]
         for s in range(500)]
v = zero_mean_test(diffs)
print(f"mean ({v.mean.x:.3f}, {v.mean.y:.3f}) px, standard error ({v.std_error.x:.3f}, {v.std_error.y:.3f}) px")
print(f"zero mean at 3 sigma: {v.is_zero_mean_at_3sigma}")
