"""Walkthrough: a full campaign with aggregated metrics and a transfer check.

A campaign pre-filters to correctly-classified items, attacks each one, and
reports ASR (success rate), Avg.Q / Med.Q (queries over successes), and mean
image quality. The same artifacts drive the ASR-vs-budget curve and a
transfer check against a second model.
"""

import tempfile

from stba import AttackConfig, CampaignConfig, MlpOracle, run_campaign
from stba.fixtures import make_fixture_model
from stba.harness import emit_plot_data, load_report, transfer_check

out_dir = tempfile.mkdtemp(prefix="stba_demo_")
cfg = CampaignConfig(
    dataset="fixture:20:0",     # 20 synthetic items, generator seed 0
    model="fixture",            # the shipped linear-softmax victim
    attack=AttackConfig(q_max=1000, seed=0),
    max_items=20,
    output_dir=out_dir,
    save_adversarials=True,
)
report = run_campaign(cfg)
print(f"attempted={report.items_attempted} skipped={report.items_skipped_misclassified}")
print(f"ASR={report.asr:.2f} Avg.Q={report.avg_q:.1f} Med.Q={report.med_q:.0f}")
print(f"mean PSNR={report.mean_psnr:.1f} dB, mean SSIM={report.mean_ssim:.4f}")

print("\nASR-vs-budget curve (first rows):")
for line in emit_plot_data(load_report(out_dir)).splitlines()[:6]:
    print("  ", line)

# transfer: do these adversarials also fool a differently-seeded victim?
target = MlpOracle(make_fixture_model(seed=999))
rate = transfer_check(out_dir, target)
print(f"\ntransfer rate to a second fixture model: {rate:.2f}")
print(f"artifacts written to {out_dir}")
