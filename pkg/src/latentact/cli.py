"""Command-line entry point: ``latentact {train,audit,certify,recommend}``.

Exit codes: 0 success, 2 usage or input error, 3 property violation found
by ``audit``, 4 certifier found no witness (tolerance alert).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import nn, properties, recsys
from ._io import atomic_write_text
from .linalg import random_orthogonal_basis, standard_basis

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VIOLATION = 3
EXIT_NONE_FOUND = 4


class UsageError(Exception):
    pass


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _parse_synth(spec: str) -> tuple[int, int, int]:
    try:
        users, items, dim = (int(p) for p in spec.lower().split("x"))
    except ValueError:
        raise UsageError(f"--synth expects USERSxITEMSxDIM, got {spec!r}") from None
    if min(users, items, dim) < 1:
        raise UsageError("--synth sizes must be positive")
    return users, items, dim


def _dataset(args) -> recsys.Dataset:
    if args.data and args.synth:
        raise UsageError("give either --data or --synth, not both")
    if args.data:
        try:
            return recsys.load_csv(args.data)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--data: {exc}") from None
    if args.synth:
        u, i, d = _parse_synth(args.synth)
        return recsys.synth_dataset(u, i, d, args.sparsity, args.seed)
    raise UsageError("a dataset is required: pass --data PATH or --synth USERSxITEMSxDIM")


def _model(args) -> nn.MLPModel:
    try:
        return nn.load_model(args.model)
    except OSError as exc:
        raise UsageError(f"--model: {exc}") from None
    except nn.ModelFormatError as exc:
        raise UsageError(f"--model {args.model}: {exc}") from None


def _out(args, name: str) -> Path:
    return Path(args.out_dir) / name


def _basis(args, n: int):
    return random_orthogonal_basis(n, args.seed) if args.basis == "random" else standard_basis(n)


def cmd_train(args) -> int:
    data = _dataset(args)
    n = data.dim
    if args.input_dim is not None and args.input_dim != n:
        raise UsageError(f"--input-dim {args.input_dim} does not match dataset dim {n}")
    if args.latent < 1:
        raise UsageError("--latent must be >= 1")
    if args.enforce_compression and args.latent > n:
        raise UsageError(
            f"--latent {args.latent} exceeds input dim {n}: encoders must reduce dimension (m <= n); "
            "pass --no-enforce-compression for control runs"
        )
    try:
        cfg = nn.TrainConfig(args.lr, args.epochs, args.batch_size, args.seed, args.init_scale)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = nn.build_autoencoder(
        n, args.latent, args.activation, tuple(args.hidden), args.hidden_activation, cfg.init_scale, args.seed
    )
    X = np.vstack([data.users, data.items])
    try:
        model, history = nn.train(model, X, cfg)
    except nn.TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_USAGE
    nn.save_model(model, _out(args, "model.txt"))
    lines = ["epoch,loss"] + [f"{e + 1},{loss!r}" for e, loss in enumerate(history)]
    atomic_write_text(_out(args, "loss.csv"), "\n".join(lines) + "\n")
    final = f"{history[-1]:.6g}" if history else "n/a"
    print(f"wrote {_out(args, 'model.txt')} ({len(history)} epochs, final loss {final})", file=sys.stderr)
    return EXIT_OK


def _audit_inputs(args, n: int):
    if args.data:
        try:
            d = recsys.load_csv(args.data)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--data: {exc}") from None
        if d.dim != n:
            raise UsageError(f"dataset dim {d.dim} does not match model input dim {n}")
        return list(np.vstack([d.users, d.items]))
    rng = np.random.default_rng(args.seed)
    return list(np.eye(n)) + list(rng.standard_normal((args.samples, n)))


def cmd_audit(args) -> int:
    if args.triples < 1 or args.samples < 0:
        raise UsageError("--triples must be >= 1 and --samples >= 0")
    model = _model(args)
    n, m = model.input_dim, model.latent_dim
    inputs = _audit_inputs(args, n)
    zi = properties.zero_image(model, n, args.tau_zero)
    nonzero = properties.nonzero_preservation_audit(model, inputs, args.tau_zero)
    order = properties.order_preservation_audit(model, n, args.triples, args.seed, tau_order=args.tau_order)
    hyper = properties.hyperplane_check(model, inputs)
    rank = properties.lemma1_rank_check(model, _basis(args, n))
    hard = (zi.is_zero and m < n) or bool(nonzero)
    report = {
        "model": {
            "input_dim": n,
            "latent_dim": m,
            "latent_activation": model.latent_activation.value,
        },
        "seed": args.seed,
        "tau_zero": args.tau_zero,
        "tau_order": args.tau_order,
        "zero_image": zi.to_dict(),
        "nonzero_preservation": {
            "inputs_tested": len(inputs),
            "violations": [c.to_dict() for c in nonzero],
        },
        "order_preservation": order.to_dict(),
        "hyperplane": {"inputs_tested": len(inputs), "max_deviation": hyper},
        "lemma1_rank": rank.to_dict(),
        "hard_violation": hard,
    }
    text = _dump_json(report)
    if args.out_dir:
        atomic_write_text(_out(args, "audit.json"), text)
    sys.stdout.write(text)
    return EXIT_VIOLATION if hard else EXIT_OK


def cmd_certify(args) -> int:
    model = _model(args)
    n, m = model.input_dim, model.latent_dim
    try:
        cert = properties.certify_violation(model, n, m, _basis(args, n), args.tau_zero, args.tau_order)
    except properties.PreconditionError as exc:
        raise UsageError(f"precondition failed: {exc}") from None
    text = _dump_json(cert.to_dict())
    if args.out_dir:
        atomic_write_text(_out(args, "certificate.json"), text)
    sys.stdout.write(text)
    return EXIT_NONE_FOUND if cert.kind is properties.CertificateKind.NONE_FOUND else EXIT_OK


def cmd_recommend(args) -> int:
    model = _model(args)
    data = _dataset(args)
    if data.dim != model.input_dim:
        raise UsageError(f"dataset dim {data.dim} does not match model input dim {model.input_dim}")
    if not data.user_ids:
        raise UsageError("dataset has no user rows to recommend for")
    if not 1 <= args.k <= len(data.item_ids):
        raise UsageError(f"--k must lie in [1, {len(data.item_ids)}]")
    report = recsys.evaluate_agreement(data, model, args.k, args.seed, args.tau_order)

    rank_lines = ["user,space,rank,item,score"]
    for uid, x in zip(data.user_ids, data.users):
        for space, enc in (("raw", None), ("latent", model)):
            res = recsys.top_k(x, data, args.k, encoder=enc, query_id=uid)
            for r, (item, score) in enumerate(res.ranked_items, start=1):
                rank_lines.append(f"{uid},{space},{r},{item},{score!r}")
    agree_lines = ["user,tau,overlap,collapsed"] + [
        f"{u.user_id},{u.kendall_tau!r},{u.topk_overlap!r},{int(u.collapsed)}" for u in report.per_user
    ]
    out = Path(args.out_dir)
    atomic_write_text(out / "rankings.csv", "\n".join(rank_lines) + "\n")
    atomic_write_text(out / "agreement.csv", "\n".join(agree_lines) + "\n")
    text = _dump_json(report.to_dict())
    atomic_write_text(out / "agreement.json", text)
    print(
        f"kendall_tau={report.kendall_tau:.4f} topk_overlap={report.topk_overlap:.4f} "
        f"collapsed={len(report.collapse_flags)}",
        file=sys.stderr,
    )
    return EXIT_OK


def _nonneg_float(s: str) -> float:
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tau-zero", type=_nonneg_float, default=properties.TAU_ZERO,
                        help="norm at or below which a vector counts as zero (default: exact zero)")
    common.add_argument("--tau-order", type=_nonneg_float, default=properties.TAU_ORDER)
    common.add_argument("--out-dir", default=None)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="CSV dataset (kind,id,v0,...)")
    data.add_argument("--synth", help="synthetic dataset USERSxITEMSxDIM")
    data.add_argument("--sparsity", type=float, default=0.0)

    p = argparse.ArgumentParser(prog="latentact", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common, data], help="train an autoencoder")
    t.add_argument("--latent", type=int, required=True, help="latent width m")
    t.add_argument("--input-dim", type=int, default=None, help="expected input dim n (checked against data)")
    t.add_argument("--activation", default="sigmoid", choices=[a.value for a in nn.Activation])
    t.add_argument("--hidden", type=int, nargs="*", default=[], help="hidden encoder widths")
    t.add_argument("--hidden-activation", default="tanh", choices=[a.value for a in nn.Activation])
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--lr", type=float, default=0.05)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--init-scale", type=float, default=1.0)
    t.add_argument("--enforce-compression", action=argparse.BooleanOptionalAction, default=True)
    t.set_defaults(func=cmd_train, out_default=".")

    a = sub.add_parser("audit", parents=[common], help="audit the three encoder properties")
    a.add_argument("--model", required=True)
    a.add_argument("--data", help="CSV whose vectors are audited (default: basis + Gaussian samples)")
    a.add_argument("--samples", type=int, default=256)
    a.add_argument("--triples", type=int, default=1000)
    a.add_argument("--basis", choices=["standard", "random"], default="standard")
    a.set_defaults(func=cmd_audit, out_default=None)

    c = sub.add_parser("certify", parents=[common], help="construct a property violation for f(0)=0, m<n")
    c.add_argument("--model", required=True)
    c.add_argument("--basis", choices=["standard", "random"], default="standard")
    c.set_defaults(func=cmd_certify, out_default=None)

    r = sub.add_parser("recommend", parents=[common, data], help="raw vs latent top-k rankings")
    r.add_argument("--model", required=True)
    r.add_argument("--k", type=int, default=10)
    r.set_defaults(func=cmd_recommend, out_default=".")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out_dir is None:
        args.out_dir = args.out_default
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
