# Regenerates the XGBoost interop fixtures. Needs xgboost, numpy, pandas.
#   python3 generate.py
# Writes <name>.csv, <name>.schema.json, <name>.dump.json and
# <name>.margins.csv (one row per sample, one column per output) for a binary
# model with native categorical splits and missing values, a one-hot indicator
# model, and a 3-class model.
import json
import os

import numpy as np
import pandas as pd
import xgboost as xgb

HERE = os.path.dirname(os.path.abspath(__file__))
JOBS = ["engineer", "teacher", "doctor", "clerk"]


def frame(n, seed):
    rng = np.random.default_rng(seed)
    df = pd.DataFrame({
        "age": rng.integers(18, 80, n).astype(float),
        "balance": rng.normal(800, 1500, n).round(),
        "job": pd.Categorical(rng.choice(JOBS, n), categories=JOBS),
    })
    df.loc[rng.random(n) < 0.05, "age"] = np.nan
    df.loc[rng.random(n) < 0.05, "balance"] = np.nan
    noise = rng.random(n)
    return df, noise


def schema(name, classes, positive):
    return {
        "name": name,
        "columns": [
            {"name": "age", "kind": "numeric"},
            {"name": "balance", "kind": "numeric"},
            {"name": "job", "kind": "categorical", "categories": JOBS},
        ],
        "classes": classes,
        "verbalizations": classes,
        "positive_class": positive,
        "task_description": "Which class?",
    }


def write(name, df, labels, classes, positive, booster, dmatrix, width):
    out = df.copy()
    out["label"] = [classes[i] for i in labels]
    out.to_csv(os.path.join(HERE, name + ".csv"), index=False, na_rep="")
    with open(os.path.join(HERE, name + ".schema.json"), "w") as f:
        json.dump(schema(name, classes, positive), f, indent=1)
    trees = [json.loads(t) for t in booster.get_dump(dump_format="json")]
    base = json.loads(booster.save_config())["learner"]["learner_model_param"]["base_score"]
    with open(os.path.join(HERE, name + ".dump.json"), "w") as f:
        json.dump(trees, f, indent=1)
    margins = booster.predict(dmatrix, output_margin=True).reshape(len(df), width)
    np.savetxt(os.path.join(HERE, name + ".margins.csv"), margins, fmt="%.9g", delimiter=",")
    print(name, "base_score", base)


def binary_native():
    df, noise = frame(400, 1)
    z = ((df.age > 40) & (df.balance > 500)) | (df.job == "teacher")
    y = (z ^ (noise < 0.1)).astype(int).to_numpy()
    d = xgb.DMatrix(df, label=y, enable_categorical=True)
    b = xgb.train({"objective": "binary:logistic", "max_depth": 3, "eta": 0.3, "max_cat_to_onehot": 1,
                   "tree_method": "hist", "base_score": 0.5, "seed": 0}, d, 8)
    write("binary_native", df, y, ["no", "yes"], 1, b, d, 1)


def binary_onehot():
    df, noise = frame(400, 2)
    z = ((df.age > 35) & (df.job == "doctor")) | (df.balance > 2000)
    y = (z ^ (noise < 0.1)).astype(int).to_numpy()
    enc = pd.DataFrame({"age": df.age, "balance": df.balance})
    for j in JOBS:
        enc["job=" + j] = (df.job == j).astype(float)
    d = xgb.DMatrix(enc, label=y)
    b = xgb.train({"objective": "binary:logistic", "max_depth": 3, "eta": 0.3, "tree_method": "exact",
                   "base_score": 0.5, "seed": 0}, d, 8)
    write("binary_onehot", df, y, ["no", "yes"], 1, b, d, 1)


def multiclass():
    df, noise = frame(450, 3)
    y = np.where(df.balance.fillna(0) > 1500, 2, np.where(df.age.fillna(50) < 40, 1, 0))
    y = np.where(noise < 0.1, (y + 1) % 3, y)
    d = xgb.DMatrix(df, label=y, enable_categorical=True)
    b = xgb.train({"objective": "multi:softprob", "num_class": 3, "max_depth": 2, "eta": 0.3,
                   "max_cat_to_onehot": 1, "tree_method": "hist", "base_score": 0.5, "seed": 0}, d, 4)
    write("multiclass", df, y, ["low", "mid", "high"], None, b, d, 3)


if __name__ == "__main__":
    binary_native()
    binary_onehot()
    multiclass()
