import time, json
import numpy as np
from myograph.data import EXERCISES
from myograph.synth import default_subjects, generate_corpus
from myograph.training import preset, train
from myograph.evaluation import evaluate_split
from myograph.baselines import build_index

ds = generate_corpus(default_subjects(2, 7), list(EXERCISES), 3, 30.0, seed=7)
out = {}
for method in ("random", "nn"):
    cfg = preset("desk", "transformer", seed=7)
    col, _ = evaluate_split(method, ds, cfg)
    out[method] = {"mean": col.mean, "per_ex": {e.name: v for e, v in col.values.items()}}
    print(method, col.mean, flush=True)
for arch in ("transformer", "cnn"):
    cfg = preset("desk", arch, seed=7)
    t0 = time.time()
    result = train(arch, ds, cfg)
    col, _ = evaluate_split(arch, ds, cfg, weights=result.weights)
    out[arch] = {"mean": col.mean, "train_s": time.time()-t0,
                 "best_step": result.best_step, "val": result.val_curve,
                 "per_ex": {e.name: v for e, v in col.values.items()}}
    print(arch, col.mean, f"{time.time()-t0:.0f}s best@{result.best_step}", flush=True)
json.dump(out, open(".tune/ordering.json", "w"), indent=1)
print("ORDER:", out["transformer"]["mean"], "<", out["cnn"]["mean"], "<", out["nn"]["mean"], "<", out["random"]["mean"])
