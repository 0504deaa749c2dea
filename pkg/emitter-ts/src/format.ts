/**
 * Line encoding for the JSONL trace format.
 *
 * One JSON object per line with fixed key order; non-finite numbers are
 * serialized as the strings "NaN", "Infinity" and "-Infinity" so every line
 * stays valid JSON.
 */

export type WireNum = number | "NaN" | "Infinity" | "-Infinity";

export function encodeNum(x: number): WireNum {
  if (Number.isNaN(x)) return "NaN";
  if (x === Infinity) return "Infinity";
  if (x === -Infinity) return "-Infinity";
  return x;
}

export function decodeNum(v: WireNum): number {
  if (v === "NaN") return NaN;
  if (v === "Infinity") return Infinity;
  if (v === "-Infinity") return -Infinity;
  return v;
}

export type ConfigValue = number | string | boolean;

export function metaLine(
  trialId: string,
  config: Record<string, ConfigValue>,
  maxEpoch: number,
  createdUnixMs: number,
): string {
  const sorted: Record<string, ConfigValue | WireNum> = {};
  for (const key of Object.keys(config).sort()) {
    const v = config[key];
    sorted[key] = typeof v === "number" ? encodeNum(v) : v;
  }
  return JSON.stringify({
    kind: "meta",
    trial_id: trialId,
    config: sorted,
    max_epoch: maxEpoch,
    created_unix_ms: createdUnixMs,
  });
}

export function epochLine(
  trialId: string,
  epoch: number,
  trainLoss: number,
  valMetric: number,
  metricMode: "maximize" | "minimize",
  wallMs: number,
): string {
  return JSON.stringify({
    kind: "epoch",
    trial_id: trialId,
    epoch,
    train_loss: encodeNum(trainLoss),
    val_metric: encodeNum(valMetric),
    metric_mode: metricMode,
    wall_ms: wallMs,
  });
}

export function layerLine(
  trialId: string,
  epoch: number,
  layerIndex: number,
  layerName: string,
  varKind: "grad" | "weight" | "act",
  frozenStats: number[],
): string {
  return JSON.stringify({
    kind: "layer",
    trial_id: trialId,
    epoch,
    layer_index: layerIndex,
    layer_name: layerName,
    var: varKind,
    stats: frozenStats.map(encodeNum),
  });
}

export function finalLine(
  trialId: string,
  status: "completed" | "terminated" | "failed",
  reason: string,
  bestValMetric: number,
  epochsRun: number,
): string {
  return JSON.stringify({
    kind: "final",
    trial_id: trialId,
    status,
    reason,
    best_val_metric: encodeNum(bestValMetric),
    epochs_run: epochsRun,
  });
}
