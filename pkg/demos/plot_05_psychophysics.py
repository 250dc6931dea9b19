"""
Staircases and intensity fits
-----------------------------

A simulated observer with a known detection threshold is run through two
interleaved staircases; the estimate should land within one step of it.
Then noiseless intensity curves are fitted with linear and exponential models.
"""

import numpy as np

from midair_texture.psychophys import ObserverModel, fit_exponential, fit_linear, run_interleaved, schedule

run = run_interleaved(ObserverModel(threshold=0.23))
print(f"estimate {run.estimate:.3f} after {len(run.trials)} trials and {run.reversal_count} reversals")

noisy = run_interleaved(ObserverModel(threshold=0.23, lapse_rate=0.05, seed=3), order="random")
print(f"with 5 % lapses: {noisy.estimate:.3f}")

# %%
# Fits recover the generating parameters exactly on clean data.

x = np.linspace(0, 1, 11)
print(fit_linear(np.column_stack([x, 93.4 * x + 5])))
print(fit_exponential(np.column_stack([x, 40 * np.exp(-6 * x) + 2])))

# %%
# Trial order for the discrimination experiment is seeded.

for trial in schedule("exp3", seed=7).trials[:4]:
    print(trial.stimulus, trial.value, trial.a_max)
