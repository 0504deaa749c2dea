/**
 * Trace-writer handle for external training loops.
 *
 * Call openTrial once per trial, emitEpoch after each epoch with the raw
 * per-layer arrays (statistics are computed locally; raw tensors never leave
 * the process), and closeTrial at the end. One handle owns one file; epochs
 * must arrive in order.
 */

import * as fs from "node:fs";

import { epochLine, finalLine, layerLine, metaLine, type ConfigValue } from "./format.js";
import { tenStats } from "./stats.js";

export interface EpochScalars {
  trainLoss: number;
  valMetric: number;
  metricMode?: "maximize" | "minimize";
  wallMs: number;
}

export interface LayerArrays {
  name: string;
  grad?: ArrayLike<number>;
  weight?: ArrayLike<number>;
  act?: ArrayLike<number>;
}

export class EmitterHandle {
  readonly trialId: string;
  readonly path: string;
  readonly maxEpoch: number;
  private fd: number;
  private nextEpoch = 0;
  private lastWallMs = 0;
  private bestVal: number | null = null;
  private metricMode: "maximize" | "minimize" = "maximize";
  private closed = false;

  constructor(trialId: string, path: string, maxEpoch: number, fd: number) {
    this.trialId = trialId;
    this.path = path;
    this.maxEpoch = maxEpoch;
    this.fd = fd;
  }

  get epochsEmitted(): number {
    return this.nextEpoch;
  }

  private writeLine(line: string): void {
    fs.writeSync(this.fd, line + "\n");
    fs.fsyncSync(this.fd);
  }

  private assertOpen(): void {
    if (this.closed) {
      throw new Error(`trial ${this.trialId} is already closed`);
    }
  }

  emitEpoch(scalars: EpochScalars, layers: LayerArrays[], epoch?: number): void {
    this.assertOpen();
    const e = epoch ?? this.nextEpoch;
    if (e !== this.nextEpoch) {
      throw new Error(`epoch ${e} out of order; expected ${this.nextEpoch}`);
    }
    if (!Number.isInteger(scalars.wallMs) || scalars.wallMs < this.lastWallMs) {
      throw new Error("wallMs must be a nondecreasing integer");
    }
    this.metricMode = scalars.metricMode ?? this.metricMode;
    const lines = [
      epochLine(
        this.trialId,
        e,
        scalars.trainLoss,
        scalars.valMetric,
        this.metricMode,
        scalars.wallMs,
      ),
    ];
    for (const kind of ["grad", "weight", "act"] as const) {
      let index = 0;
      for (const layer of layers) {
        const arr = layer[kind];
        if (arr === undefined) {
          continue;
        }
        lines.push(layerLine(this.trialId, e, index, layer.name, kind, tenStats(arr)));
        index++;
      }
    }
    for (const line of lines) {
      this.writeLine(line);
    }
    this.nextEpoch = e + 1;
    this.lastWallMs = scalars.wallMs;
    const better =
      this.bestVal === null ||
      (this.metricMode === "maximize"
        ? scalars.valMetric > this.bestVal
        : scalars.valMetric < this.bestVal);
    if (Number.isNaN(scalars.valMetric)) {
      // NaN never improves the best metric
    } else if (better) {
      this.bestVal = scalars.valMetric;
    }
  }

  close(
    status: "completed" | "terminated" | "failed",
    bestValMetric?: number,
    reason = "",
  ): void {
    this.assertOpen();
    const best = bestValMetric ?? this.bestVal ?? NaN;
    this.writeLine(finalLine(this.trialId, status, reason, best, this.nextEpoch));
    fs.closeSync(this.fd);
    this.closed = true;
  }
}

export function openTrial(
  trialId: string,
  config: Record<string, ConfigValue>,
  maxEpoch: number,
  path: string,
  createdUnixMs?: number,
): EmitterHandle {
  if (maxEpoch < 1) {
    throw new Error("maxEpoch must be positive");
  }
  let fd: number;
  try {
    fd = fs.openSync(path, "wx"); // refuse to overwrite an existing trace
  } catch (err) {
    if ((err as NodeJS.ErrnoException).code === "EEXIST") {
      throw new Error(`trace file already exists: ${path}`);
    }
    throw err;
  }
  const handle = new EmitterHandle(trialId, path, maxEpoch, fd);
  fs.writeSync(fd, metaLine(trialId, config, maxEpoch, createdUnixMs ?? Date.now()) + "\n");
  fs.fsyncSync(fd);
  return handle;
}

export function emitEpoch(
  handle: EmitterHandle,
  scalars: EpochScalars,
  layers: LayerArrays[],
  epoch?: number,
): void {
  handle.emitEpoch(scalars, layers, epoch);
}

export function closeTrial(
  handle: EmitterHandle,
  status: "completed" | "terminated" | "failed",
  bestValMetric?: number,
  reason = "",
): void {
  handle.close(status, bestValMetric, reason);
}
