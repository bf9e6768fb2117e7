/**
 * One DOM control per announced descriptor.
 *
 * Sliders are index-based over the selectable grid, so by construction they
 * can only ever emit selectable values. Interaction moves the control
 * optimistically; the authoritative APPLIED value corrects it on arrival.
 */

import { formatValue, isNumeric, nearestIndex, selectableValues } from "./params.js";
import type { WireDescriptor } from "./protocol.js";

export type EditCallback = (paramId: string, value: number | boolean | string) => void;

interface Control {
  descriptor: WireDescriptor;
  element: HTMLElement;
  setValue(value: number | boolean | string): void;
}

export class ControlPanel {
  readonly root: HTMLElement;
  private readonly controls = new Map<string, Control>();

  constructor(private readonly onEdit: EditCallback,
              doc: Document = document) {
    this.root = doc.createElement("div");
    this.root.className = "param-panel";
  }

  get count(): number {
    return this.controls.size;
  }

  /** Rebuild all controls from a fresh announcement. */
  build(descriptors: WireDescriptor[]): void {
    this.controls.clear();
    this.root.replaceChildren();
    for (const desc of descriptors) {
      const control = this.createControl(desc);
      this.controls.set(desc.id, control);
      this.root.appendChild(control.element);
    }
  }

  /** Authoritative correction from an APPLIED (or re-announced) value. */
  applyAuthoritative(paramId: string, value: number | boolean | string): void {
    this.controls.get(paramId)?.setValue(value);
  }

  currentValue(paramId: string): number | boolean | string | undefined {
    return this.controls.get(paramId)?.descriptor.value;
  }

  private createControl(desc: WireDescriptor): Control {
    const doc = this.root.ownerDocument;
    const row = doc.createElement("label");
    row.className = `param param-${desc.kind}`;
    row.dataset["paramId"] = desc.id;

    const title = doc.createElement("span");
    title.className = "param-name";
    title.textContent = desc.name;
    row.appendChild(title);

    if (isNumeric(desc)) {
      const values = selectableValues(desc);
      const slider = doc.createElement("input");
      slider.type = "range";
      slider.min = "0";
      slider.max = String(values.length - 1);
      slider.step = "1";
      slider.valueAsNumber = nearestIndex(values, Number(desc.value));
      const readout = doc.createElement("span");
      readout.className = "param-value";
      readout.textContent = formatValue(desc.value);
      slider.addEventListener("input", () => {
        const value = values[slider.valueAsNumber]!;
        desc.value = value;
        readout.textContent = formatValue(value);
        this.onEdit(desc.id, value);
      });
      row.append(slider, readout);
      return {
        descriptor: desc,
        element: row,
        setValue: (value) => {
          const v = Number(value);
          desc.value = v;
          slider.valueAsNumber = nearestIndex(values, v);
          readout.textContent = formatValue(v);
        },
      };
    }

    if (desc.kind === "boolean") {
      const box = doc.createElement("input");
      box.type = "checkbox";
      box.checked = Boolean(desc.value);
      box.addEventListener("input", () => {
        desc.value = box.checked;
        this.onEdit(desc.id, box.checked);
      });
      row.appendChild(box);
      return {
        descriptor: desc,
        element: row,
        setValue: (value) => {
          desc.value = Boolean(value);
          box.checked = Boolean(value);
        },
      };
    }

    // choice
    const select = doc.createElement("select");
    for (const choice of desc.choices ?? []) {
      const option = doc.createElement("option");
      option.value = choice;
      option.textContent = choice;
      select.appendChild(option);
    }
    select.value = String(desc.value);
    select.addEventListener("input", () => {
      desc.value = select.value;
      this.onEdit(desc.id, select.value);
    });
    row.appendChild(select);
    return {
      descriptor: desc,
      element: row,
      setValue: (value) => {
        desc.value = String(value);
        select.value = String(value);
      },
    };
  }
}
