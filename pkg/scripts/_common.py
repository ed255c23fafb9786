import argparse
from pathlib import Path

HERE = Path(__file__).resolve().parent
CONFIGS = HERE / "configs"


def parser(doc: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--outdir", default=str(HERE / "results"), help="where CSV/plot data go")
    p.add_argument("--threads", type=int, default=1)
    return p


def outdir(args) -> Path:
    d = Path(args.outdir)
    d.mkdir(parents=True, exist_ok=True)
    return d
