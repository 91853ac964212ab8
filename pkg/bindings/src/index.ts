export { BoundEngine, type BoundEngineOptions } from "./client.js";
export { EngineError } from "./errors.js";
export * from "./types.js";
