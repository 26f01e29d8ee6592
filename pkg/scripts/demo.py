import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from app.main import main  # noqa: E402


def run_demo(out: Path = Path("demo"), seed: int = 11):
    # Generate the default surrogate, then run every stage on it
    data, run = out / "data", out / "run"
    print(f"Generating the surrogate cohort in {data}...")
    status = main(["synth", "--seed", str(seed), "--out", str(data)])
    if status:
        return status

    print(f"Running the pipeline into {run}...")
    return main([
        "pipeline", "--seed", str(seed), "--out", str(run),
        "--dataset", str(data / "cohort.csv"), "--schema", str(data / "cohort.schema.json"),
    ])


if __name__ == "__main__":
    sys.exit(run_demo(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo")))
