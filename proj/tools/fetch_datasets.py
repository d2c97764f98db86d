#!/usr/bin/env python3
"""Fetch the public fairness benchmark datasets into ./data as headered CSVs.

The raw files are taken from Python wheels that bundle them (``responsibly``
for Adult / COMPAS / German Credit, ``ethicml`` for Communities and Crime /
Law School), downloaded with ``pip download`` so that any configured package
index or mirror is honoured. Only format normalisation happens here (headers,
trailing dots, whitespace); every modelling choice lives in configs/recipes.
"""

import argparse
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose",
    "credit_amount", "savings", "employment", "installment_rate",
    "personal_status", "other_debtors", "residence_since", "property",
    "age", "other_installment_plans", "housing", "existing_credits",
    "job", "num_dependents", "telephone", "foreign_worker", "credit_risk",
]


def download_wheel(package, dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
         "-d", str(dest), package],
        check=True)
    wheels = sorted(pathlib.Path(dest).glob(package.replace("-", "_") + "-*.whl"))
    if not wheels:
        raise RuntimeError(f"no wheel downloaded for {package}")
    return zipfile.ZipFile(wheels[-1])


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def adult(wheel, out):
    rows = []
    for name in ("adult.data", "adult.test"):
        text = wheel.read(f"responsibly/dataset/adult/{name}").decode("utf-8")
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [f.strip() for f in line.split(",")]
            fields[-1] = fields[-1].rstrip(".")
            rows.append(fields)
    write_rows(out / "adult.csv", ADULT_COLUMNS, rows)


def compas(wheel, out):
    text = wheel.read(
        "responsibly/dataset/compas/compas-scores-two-years.csv").decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = list(reader)
    write_rows(out / "compas.csv", header, rows)


def german(wheel, out):
    text = wheel.read("responsibly/dataset/german/german.data").decode("utf-8")
    rows = [line.split() for line in text.splitlines() if line.strip()]
    write_rows(out / "german.csv", GERMAN_COLUMNS, rows)


def communities(wheel, out):
    text = wheel.read("ethicml/data/csvs/crime.csv").decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    header = [h.replace(">0.06black", "black_gt_6pct") for h in next(reader)]
    rows = list(reader)
    write_rows(out / "communities.csv", header, rows)


def law(wheel, out):
    inner = zipfile.ZipFile(io.BytesIO(wheel.read("ethicml/data/csvs/law.csv.zip")))
    name = [n for n in inner.namelist() if n.endswith(".csv")][0]
    text = inner.read(name).decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = list(reader)
    write_rows(out / "law.csv", header, rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "data"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        resp = download_wheel("responsibly", tmp)
        adult(resp, out)
        compas(resp, out)
        german(resp, out)
        emlw = download_wheel("ethicml", tmp)
        communities(emlw, out)
        law(emlw, out)


if __name__ == "__main__":
    main()
