"""Campaign runner: dataset/model resolution, attack batches, reports.

Reports are deterministic for fixed seeds and in-process oracles: results
are keyed by item index and serialized with sorted keys, so reruns produce
byte-identical report.json files.
"""

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import fixtures, imagecore, optimizer
from .errors import FormatError, TransportError
from .imagecore import LabeledImage
from .optimizer import AttackConfig, AttackResult, run_attack
from .oracle import HttpOracle, MlpOracle, load_model_spec

log = logging.getLogger(__name__)

REPORT_FILE = "report.json"
PER_ITEM_FILE = "per_item.csv"


@dataclass
class CampaignConfig:
    dataset: str  # cifar10:path | pngdir:path | fixture:count[:seed]
    model: str  # json:path | http:url
    attack: AttackConfig
    max_items: int = 50
    output_dir: str = "stba_out"
    save_adversarials: bool = False
    workers: int = 1


@dataclass
class CampaignReport:
    items_attempted: int
    items_skipped_misclassified: int
    asr: float
    avg_q: float | None
    med_q: float | None
    mean_psnr: float | None
    mean_ssim: float | None
    per_item: list[dict]


def resolve_dataset(descriptor: str) -> list[LabeledImage]:
    kind, _, arg = descriptor.partition(":")
    if kind == "cifar10":
        with open(arg, "rb") as fh:
            return imagecore.load_cifar10_batch(fh.read())
    if kind == "pngdir":
        items, errors = imagecore.load_png_dir(arg)
        for name, msg in errors:
            log.warning("%s: %s", name, msg)
        return items
    if kind == "fixture":
        parts = arg.split(":") if arg else ["50"]
        count = int(parts[0])
        seed = int(parts[1]) if len(parts) > 1 else 0
        return fixtures.make_fixture_dataset(count, seed=seed)
    raise FormatError(f"unknown dataset descriptor {descriptor!r}")


def resolve_oracle(descriptor: str):
    if descriptor.startswith(("http://", "https://")):
        return HttpOracle(descriptor)
    kind, _, arg = descriptor.partition(":")
    if kind == "json":
        with open(arg, "rb") as fh:
            return MlpOracle(load_model_spec(fh.read()))
    if kind == "http":
        return HttpOracle(arg)
    if kind == "fixture":
        seed = int(arg) if arg else 1234
        return MlpOracle(fixtures.make_fixture_model(seed=seed))
    raise FormatError(f"unknown model descriptor {descriptor!r}")


def _median_lower(values: list[int]) -> float:
    ordered = sorted(values)
    return float(ordered[(len(ordered) - 1) // 2])


def _attack_one(oracle, item: LabeledImage, cfg: AttackConfig, index: int):
    item_cfg = replace(cfg, seed=cfg.seed + index)
    return run_attack(oracle, item, item_cfg)


def run_campaign(
    cfg: CampaignConfig,
    items: list[LabeledImage] | None = None,
    oracle=None,
) -> CampaignReport:
    """Attack every correctly-classified item and aggregate metrics.

    The one clean pre-check query per item is outside the attack budget
    (only correctly-classified images are attacked; the filtering pass is
    recorded in the report for transparency).
    """
    if items is None:
        items = resolve_dataset(cfg.dataset)
    if oracle is None:
        oracle = resolve_oracle(cfg.model)
    items = items[: cfg.max_items]

    to_attack: list[tuple[int, LabeledImage]] = []
    skipped = 0
    for i, item in enumerate(items):
        clean_scores = oracle.predict(item.image)
        if int(np.argmax(clean_scores)) != item.label:
            skipped += 1
        else:
            to_attack.append((i, item))

    results: dict[int, AttackResult] = {}
    failures: dict[int, str] = {}

    def attack(pair):
        i, item = pair
        try:
            results[i] = _attack_one(oracle, item, cfg.attack, i)
        except TransportError as exc:
            failures[i] = str(exc)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(attack, to_attack))
    else:
        for pair in to_attack:
            attack(pair)

    per_item = []
    successes = []
    for i, item in sorted((p for p in to_attack), key=lambda p: p[0]):
        if i in failures:
            per_item.append(
                {"index": i, "label": item.label, "status": "failed", "error": failures[i]}
            )
            continue
        res = results[i]
        entry = {
            "index": i,
            "label": item.label,
            "status": "attacked",
            "success": res.success,
            "queries_used": res.queries_used,
            "iterations": res.iterations,
            "psnr": "inf" if math.isinf(res.psnr) else res.psnr,
            "ssim": res.ssim,
        }
        per_item.append(entry)
        if res.success:
            successes.append(res)

    attempted = len(to_attack)
    asr = len(successes) / attempted if attempted else 0.0
    qs = [r.queries_used for r in successes]
    report = CampaignReport(
        items_attempted=attempted,
        items_skipped_misclassified=skipped,
        asr=asr,
        avg_q=float(np.mean(qs)) if qs else None,
        med_q=_median_lower(qs) if qs else None,
        mean_psnr=float(np.mean([r.psnr for r in successes])) if successes else None,
        mean_ssim=float(np.mean([r.ssim for r in successes])) if successes else None,
        per_item=per_item,
    )
    _write_report(cfg, report, results, items)
    return report


def _report_to_dict(cfg: CampaignConfig, report: CampaignReport) -> dict:
    attack_cfg = dict(vars(cfg.attack))
    return {
        "config": {
            "dataset": cfg.dataset,
            "model": cfg.model,
            "attack": attack_cfg,
            "max_items": cfg.max_items,
            "save_adversarials": cfg.save_adversarials,
            "workers": cfg.workers,
        },
        "items_attempted": report.items_attempted,
        "items_skipped_misclassified": report.items_skipped_misclassified,
        "asr": report.asr,
        "avg_q": report.avg_q,
        "med_q": report.med_q,
        "mean_psnr": report.mean_psnr,
        "mean_ssim": report.mean_ssim,
        "per_item": report.per_item,
    }


def _write_report(
    cfg: CampaignConfig,
    report: CampaignReport,
    results: dict[int, AttackResult],
    items: list[LabeledImage],
) -> None:
    os.makedirs(cfg.output_dir, exist_ok=True)
    doc = _report_to_dict(cfg, report)
    with open(os.path.join(cfg.output_dir, REPORT_FILE), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(
        os.path.join(cfg.output_dir, PER_ITEM_FILE), "w", newline="", encoding="utf-8"
    ) as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "label", "status", "success", "queries_used", "psnr", "ssim"]
        )
        for entry in report.per_item:
            writer.writerow(
                [
                    entry["index"],
                    entry["label"],
                    entry["status"],
                    entry.get("success", ""),
                    entry.get("queries_used", ""),
                    entry.get("psnr", ""),
                    entry.get("ssim", ""),
                ]
            )
    if cfg.save_adversarials:
        for i, res in sorted(results.items()):
            _save_adversarial(cfg.output_dir, i, res)


def _save_adversarial(out_dir: str, index: int, res: AttackResult) -> None:
    from PIL import Image as PILImage

    doc = optimizer.result_to_dict(res)
    with open(
        os.path.join(out_dir, f"adv_{index:04d}.json"), "w", encoding="utf-8"
    ) as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
    # 8-bit PNG is for inspection; re-verification uses the float payload
    arr = np.rint(res.adversarial * 255.0).astype(np.uint8).transpose(1, 2, 0)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    PILImage.fromarray(arr).save(os.path.join(out_dir, f"adv_{index:04d}.png"))


def load_report(report_dir: str) -> dict:
    with open(os.path.join(report_dir, REPORT_FILE), encoding="utf-8") as fh:
        return json.load(fh)


def transfer_check(report_dir: str, target_oracle) -> float:
    """Fraction of source-successful adversarials that also fool the target."""
    report = load_report(report_dir)
    checked = 0
    transferred = 0
    for entry in report["per_item"]:
        if entry.get("status") != "attacked" or not entry.get("success"):
            continue
        path = os.path.join(report_dir, f"adv_{entry['index']:04d}.json")
        if not os.path.exists(path):
            raise FormatError(
                f"{path}: missing saved adversarial (rerun with save_adversarials)"
            )
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        adv = optimizer.decode_array_f32(doc["adversarial"])
        scores = target_oracle.predict(adv)
        checked += 1
        if int(np.argmax(scores)) != entry["label"]:
            transferred += 1
    if checked == 0:
        raise FormatError("no successful adversarials saved in the report")
    return transferred / checked


def emit_plot_data(report: dict, step: int = 50) -> str:
    """CSV of the empirical ASR-vs-query-budget curve, sampled every `step`."""
    attempted = report["items_attempted"]
    q_max = report["config"]["attack"]["q_max"]
    queries = [
        e["queries_used"]
        for e in report["per_item"]
        if e.get("status") == "attacked" and e.get("success")
    ]
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["query_budget", "asr"])
    for budget in range(step, q_max + 1, step):
        asr = sum(1 for q in queries if q <= budget) / attempted if attempted else 0.0
        writer.writerow([budget, asr])
    return buf.getvalue()
