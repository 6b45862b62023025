export interface ManifestFrame {
  path: string;
  index: number;
  value: number;
}

export interface Manifest {
  scene_id: string;
  frames: ManifestFrame[];
  aligned: boolean;
  undistorted: boolean;
  index_map?: string;
  viewer_version?: number;
  provenance?: Record<string, unknown>;
}

/** Decoded raster: row-major samples scaled to [0, 1]. */
export interface Raster {
  width: number;
  height: number;
  channels: number;
  data: Float32Array;
}

/** Per-frame PSNR entries; "exact" marks bit-identical frames. */
export interface BundleReport {
  per_frame_psnr: (number | "exact")[];
}
