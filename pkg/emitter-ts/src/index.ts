export { STAT_ORDER, exactSum, statsObject, tenStats } from "./stats.js";
export {
  encodeNum,
  decodeNum,
  epochLine,
  finalLine,
  layerLine,
  metaLine,
} from "./format.js";
export type { ConfigValue, WireNum } from "./format.js";
export { EmitterHandle, closeTrial, emitEpoch, openTrial } from "./emitter.js";
export type { EpochScalars, LayerArrays } from "./emitter.js";
