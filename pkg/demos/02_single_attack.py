"""Walkthrough: one query-budgeted attack against the fixture classifier.

The optimizer samples candidate flow fields around a mean, scores each
candidate with one oracle query, and moves the mean along the NES gradient
estimate. A growing elementwise budget keeps displacements small early on.
"""

import numpy as np

from stba import AttackConfig, MlpOracle, run_attack
from stba.fixtures import make_fixture_dataset, make_fixture_model

model = make_fixture_model()
oracle = MlpOracle(model)
item = make_fixture_dataset(1, seed=3, model=model)[0]

clean_scores = oracle.predict(item.image)
print(f"clean scores: {clean_scores}, true label: {item.label}")

cfg = AttackConfig(q_max=1000, seed=0)
print(
    f"config: n_sample={cfg.n_sample} lr={cfg.lr} sigma={cfg.sigma} "
    f"lambda={cfg.smooth_weight} xi {cfg.xi_init}->{cfg.xi_max}"
)

result = run_attack(oracle, item, cfg)
print(f"\nsuccess={result.success} after {result.queries_used} queries "
      f"({result.iterations} iterations)")
print(f"PSNR {result.psnr:.1f} dB, SSIM {result.ssim:.4f}")
print(f"max displacement: {np.max(np.abs(result.final_flow)):.4f} px")

print("\nloss trace (iteration, total, margin, smoothness):")
for row in result.loss_trace[:5]:
    print("  ", [round(v, 4) for v in row])
if result.success:
    adv_scores = oracle.predict(result.adversarial)
    print(f"\nadversarial scores: {adv_scores} -> argmax flipped")
