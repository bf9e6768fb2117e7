/**
 * Parameter descriptors as announced by the host, plus the selectable-value
 * grid that controls must stay on.
 */

import type { WireDescriptor } from "./protocol.js";

export interface NumericDescriptor extends WireDescriptor {
  kind: "real" | "integer";
  min: number;
  max: number;
  quantized_step: number;
}

export function isNumeric(d: WireDescriptor): d is NumericDescriptor {
  return d.kind === "real" || d.kind === "integer";
}

/** All values min + k*step inside [min, max]; min is always selectable. */
export function selectableValues(d: NumericDescriptor): number[] {
  const count = Math.floor((d.max - d.min) / d.quantized_step) + 1;
  const values: number[] = [];
  for (let k = 0; k < count; k += 1) {
    values.push(Math.min(d.min + k * d.quantized_step, d.max));
  }
  return values;
}

/** Index of the selectable value nearest to `value` (ties toward max). */
export function nearestIndex(values: number[], value: number): number {
  let best = 0;
  for (let i = 1; i < values.length; i += 1) {
    const better =
      Math.abs(values[i]! - value) < Math.abs(values[best]! - value) ||
      (Math.abs(values[i]! - value) === Math.abs(values[best]! - value) &&
        values[i]! > values[best]!);
    if (better) best = i;
  }
  return best;
}

export function formatValue(value: number | boolean | string): string {
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : value.toPrecision(4);
  }
  return String(value);
}
