"""Export the benchmark suite in ``benchmarks/`` as label-column CSVs.

Sources are classic public binary classification sets shipped offline by
scikit-learn and the ``rdatasets`` package (R dataset mirror).  Only
needed to regenerate the committed CSVs:

    pip install rdatasets
    python scripts/make_benchmarks.py benchmarks/
"""

import argparse
import os

import pandas as pd


def _r(pkg, item):
    import rdatasets

    df = rdatasets.data(pkg, item)
    return df.drop(columns=[c for c in ("rownames",) if c in df.columns])


def affairs():
    df = _r("AER", "Affairs")
    df["label"] = (df.pop("affairs") > 0).map({True: "yes", False: "no"})
    return df


def biopsy():
    df = _r("MASS", "biopsy").drop(columns=["ID"]).dropna()
    df["label"] = df.pop("class")
    return df


def birthwt():
    # bwt is the birth weight that defines the label
    df = _r("MASS", "birthwt").drop(columns=["bwt"])
    df["label"] = df.pop("low").map({1: "low", 0: "normal"})
    return df


def breast_cancer():
    from sklearn.datasets import load_breast_cancer

    b = load_breast_cancer(as_frame=True)
    df = b.data.copy()
    df.columns = [c.replace(" ", "_") for c in df.columns]
    df["label"] = b.target.map({0: "malignant", 1: "benign"})
    return df


def cps1985():
    df = _r("AER", "CPS1985")
    df["label"] = df.pop("union")
    return df


def crabs():
    df = _r("MASS", "crabs").drop(columns=["index"])
    df["label"] = df.pop("sp")
    return df


def housing_aircon():
    df = _r("AER", "HousePrices")
    df["label"] = df.pop("aircon")
    return df


def infert():
    df = _r("datasets", "infert").drop(columns=["stratum", "pooled.stratum"])
    df["label"] = df.pop("case").map({1: "case", 0: "control"})
    return df


def mroz():
    df = _r("carData", "Mroz")
    df["label"] = df.pop("lfp")
    return df


def penguins_sex():
    df = _r("palmerpenguins", "penguins").dropna()
    df["label"] = df.pop("sex")
    return df


def pima():
    df = pd.concat([_r("MASS", "Pima.tr"), _r("MASS", "Pima.te")], ignore_index=True)
    df["label"] = df.pop("type")
    return df


def psid1982():
    df = _r("AER", "PSID1982")
    df["label"] = df.pop("union")
    return df


def swisslabor():
    df = _r("AER", "SwissLabor")
    df["label"] = df.pop("participation")
    return df


BUILDERS = [affairs, biopsy, birthwt, breast_cancer, cps1985, crabs, housing_aircon,
            infert, mroz, penguins_sex, pima, psid1982, swisslabor]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir")
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)
    for build in BUILDERS:
        df = build()
        path = os.path.join(args.outdir, f"{build.__name__}.csv")
        df.to_csv(path, index=False)
        print(f"{path}: {len(df)} rows, {df.shape[1] - 1} columns, "
              f"labels {df['label'].value_counts().to_dict()}")


if __name__ == "__main__":
    main()
