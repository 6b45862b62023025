import type { LoadedBundle } from "./bundle.js";

/**
 * Viewer state machine, kept free of DOM so the behavior is testable:
 * slider movement, tap-to-refocus lookup, and compare-mode pairing rules.
 */

export const TAP_ANIMATION_MS = 300;

export interface CompareState {
  target: LoadedBundle;
  /** divider position in [0, 1] across the viewport */
  divider: number;
}

export interface ViewerEvent {
  kind: "frame" | "notice" | "tooltip";
  value: string | number;
}

export class BundleView {
  readonly bundle: LoadedBundle;
  currentIndex = 0;
  compare: CompareState | null = null;
  notice: string | null = null;
  private listeners: ((e: ViewerEvent) => void)[] = [];

  constructor(bundle: LoadedBundle) {
    this.bundle = bundle;
  }

  get frameCount(): number {
    return this.bundle.frames.length;
  }

  get width(): number {
    return this.bundle.frames[0].width;
  }

  get height(): number {
    return this.bundle.frames[0].height;
  }

  onEvent(fn: (e: ViewerEvent) => void): void {
    this.listeners.push(fn);
  }

  private emit(e: ViewerEvent): void {
    for (const fn of this.listeners) fn(e);
  }

  /** Display frame `index`; out-of-range values clamp. Compare moves in lockstep. */
  slideTo(index: number): number {
    const clamped = Math.min(this.frameCount - 1, Math.max(0, Math.round(index)));
    if (clamped !== this.currentIndex) {
      this.currentIndex = clamped;
      this.emit({ kind: "frame", value: clamped });
    }
    return this.currentIndex;
  }

  stepBy(delta: number): number {
    return this.slideTo(this.currentIndex + delta);
  }

  /**
   * Map a display-space point to image space and return the index-map value,
   * or null when the tap misses the image or no index map is available.
   */
  lookupTap(xDisplay: number, yDisplay: number, displayWidth: number, displayHeight: number): number | null {
    const b = this.bundle;
    if (!b.indexMap) {
      this.emit({ kind: "tooltip", value: "no index map in this bundle" });
      return null;
    }
    const x = Math.floor((xDisplay / displayWidth) * b.indexWidth);
    const y = Math.floor((yDisplay / displayHeight) * b.indexHeight);
    if (x < 0 || y < 0 || x >= b.indexWidth || y >= b.indexHeight) return null;
    return b.indexMap[y * b.indexWidth + x];
  }

  /**
   * Tap-to-refocus: plan the slider animation to the tapped frame.  Returns
   * the target index (null for a no-op tap).  The animation visits every
   * intermediate frame across TAP_ANIMATION_MS.
   */
  tapToRefocus(xDisplay: number, yDisplay: number, displayWidth: number, displayHeight: number): number | null {
    const target = this.lookupTap(xDisplay, yDisplay, displayWidth, displayHeight);
    if (target === null || target === this.currentIndex) return target;
    const plan = animationPlan(this.currentIndex, target, TAP_ANIMATION_MS);
    for (const step of plan) {
      setTimeout(() => this.slideTo(step.index), step.atMs);
    }
    return target;
  }

  /**
   * Enable compare mode.  The target must match frame count and dimensions;
   * otherwise comparison stays off and a visible notice explains why.
   */
  setCompare(target: LoadedBundle): boolean {
    const ok =
      target.frames.length === this.frameCount &&
      target.frames[0].width === this.width &&
      target.frames[0].height === this.height;
    if (!ok) {
      this.compare = null;
      this.notice =
        `cannot compare: bundle has ${target.frames.length} frames at ` +
        `${target.frames[0].width}x${target.frames[0].height}, expected ` +
        `${this.frameCount} at ${this.width}x${this.height}`;
      this.emit({ kind: "notice", value: this.notice });
      return false;
    }
    this.notice = null;
    this.compare = { target, divider: 0.5 };
    return true;
  }

  setDivider(position: number): number {
    if (this.compare) {
      this.compare.divider = Math.min(1, Math.max(0, position));
      return this.compare.divider;
    }
    return 0;
  }

  /** Overlay text for the current frame's PSNR, or null when no report is present. */
  overlayText(): string | null {
    const rep = this.compare?.target.report ?? this.bundle.report;
    if (!rep || !Array.isArray(rep.per_frame_psnr)) return null;
    const v = rep.per_frame_psnr[this.currentIndex];
    if (v === undefined) return null;
    return v === "exact" ? "PSNR: exact match" : `PSNR: ${v.toFixed(2)} dB`;
  }
}

export interface AnimationStep {
  index: number;
  atMs: number;
}

/** Even time spacing through every intermediate frame (inclusive of target). */
export function animationPlan(from: number, to: number, totalMs: number): AnimationStep[] {
  const count = Math.abs(to - from);
  if (count === 0) return [];
  const dir = to > from ? 1 : -1;
  const steps: AnimationStep[] = [];
  for (let k = 1; k <= count; k++) {
    steps.push({ index: from + dir * k, atMs: (totalMs * k) / count });
  }
  return steps;
}
