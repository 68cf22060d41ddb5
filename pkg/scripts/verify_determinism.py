"""Runs gen + pipeline twice with different worker counts and compares artifact hashes."""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path
from tempfile import TemporaryDirectory

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app_factory import create_app  # noqa: E402


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(path.relative_to(root)): hashlib.sha256(path.read_bytes()).hexdigest()
        for path in sorted(root.rglob("*"))
        if path.is_file()
    }


def _run(app, workdir: Path, scenes: int, seed: int, threads: int, backend: str) -> dict[str, str]:
    dataset = workdir / "dataset"
    reports = workdir / "reports"
    common = ["--seed", str(seed), "--threads", str(threads), "--backend", backend]
    code = app.run(["gen", "--mode", "multi", "--scenes", str(scenes), "--out", str(dataset), "--labels", *common])
    if code:
        raise SystemExit(code)
    code = app.run(
        ["pipeline", "--dataset", str(dataset), "--noise", "in_domain", "--out", str(reports / "report.json"), *common]
    )
    if code:
        raise SystemExit(code)
    return tree_digest(workdir)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenes", type=int, default=4)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--threads", type=int, default=4)
    parser.add_argument("--celery", action="store_true", help="Compare against the Celery backend too")
    args = parser.parse_args()

    app = create_app()
    runs = [("threads=1", 1, "threads"), (f"threads={args.threads}", args.threads, "threads")]
    if args.celery:
        runs.append(("celery", 1, "celery"))

    digests = {}
    with TemporaryDirectory() as tmp:
        for name, threads, backend in runs:
            digests[name] = _run(app, Path(tmp) / name, args.scenes, args.seed, threads, backend)

    reference_name, reference = next(iter(digests.items()))
    ok = True
    for name, digest in digests.items():
        if digest != reference:
            ok = False
            differing = sorted(k for k in set(digest) | set(reference) if digest.get(k) != reference.get(k))
            print(f"{name} differs from {reference_name} in {len(differing)} files, e.g. {differing[:5]}", file=sys.stderr)
    if ok:
        print(f"Identical artifacts across {', '.join(digests)} ({len(reference)} files).")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
