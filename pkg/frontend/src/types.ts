/** Payload types mirroring docs/schema.md (gxestat-bundle/1). */

export type GgeMode =
  | "pc_scatter"
  | "mean_vs_stability"
  | "ranking_genotypes"
  | "ranking_environments"
  | "which_won_where"
  | "discrim_vs_repr"
  | "env_relationship";

export const GGE_MODES: GgeMode[] = [
  "pc_scatter",
  "mean_vs_stability",
  "ranking_genotypes",
  "ranking_environments",
  "which_won_where",
  "discrim_vs_repr",
  "env_relationship",
];

export type Point = [number, number];

export interface BiplotGeometry {
  mode: GgeMode;
  genotype_points: Record<string, Point>;
  environment_points: Record<string, Point>;
  axes: {
    mean_environment_axis?: Point;
    mean_environment_point?: Point;
  };
  overlays: Record<string, unknown>;
  explained_variance: number[];
  svp: number;
  centering: string;
}

export interface WhichWonWhereOverlays {
  hull: string[];
  hull_points: Record<string, Point>;
  sector_rays: Point[];
  winner_by_environment: Record<string, string>;
  sector_of_environment: Record<string, number>;
}

export interface DiscriminationEntry {
  vector_length: number;
  angle_deg: number;
  representative: boolean;
}

export interface SignificanceRow {
  term: string;
  kind: "random" | "fixed" | "residual";
  statistic: number | null;
  df: number | [number, number] | null;
  p_value: number | null;
  variance: number | null;
  std_dev: number | null;
  mean_square: number | null;
}

export interface StabilityRow {
  genotype: string;
  slope: number;
  slope_mark: string;
  deviation_ms: number;
  deviation_mark: string;
  shukla_sigma2: number;
  sigma2_mark: string;
  shukla_ssquares: number;
  ssquares_mark: string;
  wricke_w2: number;
  kang_ys: number;
  kang_selected: boolean;
  mean_trait: number;
  cv: number;
  lin_binns_p: number;
}

export interface AmmiBiplot {
  axes: number[];
  genotype_points: Record<string, number[]>;
  environment_points: Record<string, number[]>;
  interaction_sign: Record<string, Record<string, number>>;
  singular_value_share: number[];
}

export interface AnalysisBundle {
  version: string;
  dataset_summary: {
    trait: string;
    n_records: number;
    genotypes: string[];
    locations: string[];
    years: string[];
    reps: string[];
    n_genotypes: number;
    n_environments: number;
    balanced: boolean;
  };
  significance: {
    case: number;
    table: { rows: SignificanceRow[] };
    variance_components: Record<string, { variance: number; std_dev: number }>;
    residual_variance: number;
  };
  stability: { error_ms: number; error_df: number; rows: StabilityRow[] };
  ammi: {
    singular_values: number[];
    n_components: number;
    anova: Array<Record<string, unknown>>;
    biplot: AmmiBiplot | null;
  };
  gge: {
    centering: string;
    explained_variance: number[];
    modes: Record<GgeMode, BiplotGeometry>;
  };
}

export interface Selection {
  kind: "genotype" | "environment";
  name: string;
}
