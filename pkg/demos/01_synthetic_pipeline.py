#!/usr/bin/env python3
"""Walk the whole pipeline on a synthetic run-to-failure series.

No external data needed: the degradation fixture mimics the shape of a
bearing trend (flat, slow rise, sharp failure climb, a few spikes), and
everything downstream is exactly what the CLI does internally.
"""

import numpy as np

from prognost import (
    TrainConfig,
    compute_metrics,
    fill_missing,
    make_degradation_series,
    one_step_predictions,
    persistence_predictions,
    prepare_training_data,
    remove_outliers,
    train,
)

# ---- 1. a raw trend series, one value per snapshot -------------------------
series = make_degradation_series(400)
print(f"raw series: {len(series)} points, "
      f"range [{series.values.min():.3f}, {series.values.max():.3f}]")

# ---- 2. clean it: interpolate gaps, strip spikes ---------------------------
filled = fill_missing(series, max_gap=3)
cleaned, replaced = remove_outliers(filled, window=11, k=5)
print(f"outlier filter replaced {len(replaced)} points at indices {replaced[:8]}...")

# ---- 3. scale on the training prefix only, window, split 70:30 -------------
split, scaler = prepare_training_data(cleaned, window_length=5)
print(f"windows: {len(split.train)} train / {len(split.test)} test, "
      f"scaler [{scaler.min:.3f}, {scaler.max:.3f}]")

# ---- 4. train a small stack (the full 128/64 setup works the same way) -----
cfg = TrainConfig(hidden_dims=(16,), epochs=150, seed=42)
params, report = train(split, cfg)
print(f"epoch   1: train loss {report.train_loss[0]:.5f}")
print(f"epoch {cfg.epochs}: train loss {report.train_loss[-1]:.5f}, "
      f"test rmse {report.test_rmse[-1]:.5f}")

# ---- 5. one-step-ahead predictions and metrics ------------------------------
# Scaling is fit on the training prefix only (no leakage), so the failure
# climb pushes test inputs far above 1.0. Saturated gates cap what the
# network can emit out there, which is why the early test span tracks well
# while the final climb runs away from the model; the persistence baseline
# has no such output bound.
trace = one_step_predictions(params, split.test, scaler, space="scaled")
rep = compute_metrics(trace.actual, trace.predicted)
baseline = compute_metrics(split.test.targets, persistence_predictions(split.test))
print(f"model test : rmse {rep.rmse:.5f}  mae {rep.mae:.5f}  nmae {rep.nmae:.5f}")
print(f"persistence: rmse {baseline.rmse:.5f}  mae {baseline.mae:.5f}")

half = len(split.test) // 2
early = compute_metrics(trace.actual[:half], trace.predicted[:half])
late = compute_metrics(trace.actual[half:], trace.predicted[half:])
print(f"early test half rmse {early.rmse:.5f} vs late (failure) half {late.rmse:.5f}")

# the trace is the plotting payload: actual vs predicted along the series
worst = int(np.argmax(np.abs(trace.actual - trace.predicted)))
print(f"largest miss at origin index {trace.origin_indices[worst]}: "
      f"actual {trace.actual[worst]:.3f} vs predicted {trace.predicted[worst]:.3f}")
