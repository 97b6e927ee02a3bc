"""Command-line entry points: attack campaigns, transfer checks, ASR curves."""

import argparse
import sys

from .harness import (
    CampaignConfig,
    emit_plot_data,
    load_report,
    resolve_oracle,
    run_campaign,
    transfer_check,
)
from .optimizer import AttackConfig

_APPLY_TO = {"high": "high_frequency", "low": "low_frequency", "full": "full_image"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stba")
    sub = parser.add_subparsers(dest="command", required=True)

    attack = sub.add_parser("attack", help="run an attack campaign")
    attack.add_argument("--dataset", required=True, help="cifar10:path | pngdir:path | fixture:N[:seed]")
    attack.add_argument("--model", required=True, help="json:path | http:url")
    attack.add_argument("--qmax", type=int, default=1000)
    attack.add_argument("--nsample", type=int, default=10)
    attack.add_argument("--lr", type=float, default=0.1)
    attack.add_argument("--sigma", type=float, default=None)
    attack.add_argument("--lambda", dest="smooth_weight", type=float, default=5.0)
    attack.add_argument("--xi-init", type=float, default=0.1)
    attack.add_argument("--xi-max", type=float, default=3.0)
    attack.add_argument("--adjust-num", type=int, default=20)
    attack.add_argument("--kappa", type=float, default=0.0)
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--apply-to", choices=sorted(_APPLY_TO), default="high")
    attack.add_argument("--max-items", type=int, default=50)
    attack.add_argument("--out", required=True)
    attack.add_argument("--save-adversarials", action="store_true")
    attack.add_argument("--workers", type=int, default=1)

    transfer = sub.add_parser("transfer", help="re-score saved adversarials on a second model")
    transfer.add_argument("--report", required=True)
    transfer.add_argument("--target", required=True, help="json:path | http:url")

    curve = sub.add_parser("curve", help="emit the ASR-vs-query-budget CSV")
    curve.add_argument("--report", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "attack":
            attack_cfg = AttackConfig(
                q_max=args.qmax,
                n_sample=args.nsample,
                lr=args.lr,
                sigma=args.sigma,
                smooth_weight=args.smooth_weight,
                xi_init=args.xi_init,
                xi_max=args.xi_max,
                adjust_num=args.adjust_num,
                kappa=args.kappa,
                seed=args.seed,
                apply_to=_APPLY_TO[args.apply_to],
            )
            cfg = CampaignConfig(
                dataset=args.dataset,
                model=args.model,
                attack=attack_cfg,
                max_items=args.max_items,
                output_dir=args.out,
                save_adversarials=args.save_adversarials,
                workers=args.workers,
            )
            report = run_campaign(cfg)
            print(
                f"attempted={report.items_attempted} "
                f"skipped={report.items_skipped_misclassified} "
                f"asr={report.asr:.3f} avg_q={report.avg_q} med_q={report.med_q}"
            )
        elif args.command == "transfer":
            fraction = transfer_check(args.report, resolve_oracle(args.target))
            print(f"transfer_rate={fraction:.3f}")
        elif args.command == "curve":
            sys.stdout.write(emit_plot_data(load_report(args.report)))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
