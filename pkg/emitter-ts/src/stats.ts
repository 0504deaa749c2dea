/**
 * The ten summary statistics of one tensor snapshot, in the frozen
 * serialization order:
 *
 *   [avg, var, median, min, max, q3, q1, skewness, kurtosis, zero_ratio]
 *
 * Definitions: population moments, excess kurtosis (0 by convention when the
 * variance is 0), quartiles by linear interpolation at rank p*(n-1), and
 * zero_ratio counting exact zeros. All sums are exactly rounded, so results
 * are identical for any permutation of the input and bit-compatible with the
 * diagnosis engine's implementation of the same definitions.
 */

export const STAT_ORDER = [
  "avg",
  "var",
  "median",
  "min",
  "max",
  "q3",
  "q1",
  "skewness",
  "kurtosis",
  "zero_ratio",
] as const;

export type StatName = (typeof STAT_ORDER)[number];

/**
 * Correctly rounded sum of finite doubles (Shewchuk partials with the
 * round-half-even correction); falls back to plain left-to-right
 * accumulation if the exact algorithm overflows mid-stream.
 */
export function exactSum(values: ArrayLike<number>): number {
  const partials: number[] = [];
  let overflowed = false;
  for (let k = 0; k < values.length; k++) {
    let x = values[k];
    let i = 0;
    for (let j = 0; j < partials.length; j++) {
      let y = partials[j];
      if (Math.abs(x) < Math.abs(y)) {
        const t = x;
        x = y;
        y = t;
      }
      const hi = x + y;
      const lo = y - (hi - x);
      if (lo !== 0) {
        partials[i++] = lo;
      }
      x = hi;
    }
    if (!Number.isFinite(x)) {
      overflowed = true;
      break;
    }
    partials.length = i;
    partials.push(x);
  }
  if (overflowed) {
    let s = 0;
    for (let k = 0; k < values.length; k++) {
      s += values[k];
    }
    return s;
  }
  let n = partials.length;
  let hi = 0;
  if (n > 0) {
    hi = partials[--n];
    let lo = 0;
    while (n > 0) {
      const x = hi;
      const y = partials[--n];
      hi = x + y;
      const yr = hi - x;
      lo = y - yr;
      if (lo !== 0) {
        break;
      }
    }
    if (n > 0 && ((lo < 0 && partials[n - 1] < 0) || (lo > 0 && partials[n - 1] > 0))) {
      const y = lo * 2;
      const x = hi + y;
      const yr = x - hi;
      if (y === yr) {
        hi = x;
      }
    }
  }
  return hi;
}

/** Sum of moment terms; elementwise overflow propagates as infinity. */
function momentSum(terms: Float64Array): number {
  let hasPos = false;
  let hasNeg = false;
  for (let i = 0; i < terms.length; i++) {
    if (terms[i] === Infinity) hasPos = true;
    else if (terms[i] === -Infinity) hasNeg = true;
  }
  if (hasPos && hasNeg) return NaN;
  if (hasPos) return Infinity;
  if (hasNeg) return -Infinity;
  return exactSum(terms);
}

function quantile(sorted: ArrayLike<number>, p: number): number {
  const n = sorted.length;
  const pos = p * (n - 1);
  const lo = Math.floor(pos);
  const hi = Math.ceil(pos);
  const vlo = sorted[lo];
  const vhi = sorted[hi];
  if (lo === hi || vlo === vhi) {
    return vlo;
  }
  return vlo + (pos - lo) * (vhi - vlo);
}

/** The ten statistics in the frozen order. Throws on an empty input. */
export function tenStats(values: ArrayLike<number>): number[] {
  const n = values.length;
  if (n === 0) {
    throw new Error("cannot summarize an empty sequence");
  }
  let zeros = 0;
  let hasNan = false;
  let hasPinf = false;
  let hasNinf = false;
  for (let i = 0; i < n; i++) {
    const v = values[i];
    if (v === 0) zeros++;
    if (Number.isNaN(v)) hasNan = true;
    else if (v === Infinity) hasPinf = true;
    else if (v === -Infinity) hasNinf = true;
  }
  const zeroRatio = zeros / n;

  if (hasNan || (hasPinf && hasNinf)) {
    return [NaN, NaN, NaN, NaN, NaN, NaN, NaN, NaN, NaN, zeroRatio];
  }

  const sorted = Float64Array.from(values as ArrayLike<number>).sort();
  const vmin = sorted[0];
  const vmax = sorted[n - 1];
  const median = quantile(sorted, 0.5);
  const q1 = quantile(sorted, 0.25);
  const q3 = quantile(sorted, 0.75);

  if (hasPinf || hasNinf) {
    const avg = hasPinf ? Infinity : -Infinity;
    return [avg, NaN, median, vmin, vmax, q3, q1, NaN, NaN, zeroRatio];
  }

  const avg = exactSum(values) / n;
  const d2 = new Float64Array(n);
  const d3 = new Float64Array(n);
  const d4 = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    const d = values[i] - avg;
    const t2 = d * d;
    d2[i] = t2;
    d3[i] = t2 * d;
    d4[i] = t2 * t2;
  }
  const m2 = momentSum(d2) / n;
  let skewness = 0;
  let kurtosis = 0;
  if (m2 !== 0) {
    const m3 = momentSum(d3) / n;
    const m4 = momentSum(d4) / n;
    skewness = m3 / (m2 * Math.sqrt(m2));
    kurtosis = m4 / (m2 * m2) - 3;
  }
  return [avg, m2, median, vmin, vmax, q3, q1, skewness, kurtosis, zeroRatio];
}

export function statsObject(values: ArrayLike<number>): Record<StatName, number> {
  const frozen = tenStats(values);
  const out = {} as Record<StatName, number>;
  STAT_ORDER.forEach((name, i) => {
    out[name] = frozen[i];
  });
  return out;
}
