/** JSON shapes exactly as the moderation service returns them, plus the
 * derived view model the renderers consume.  The client never recomputes a
 * number: every displayed value is copied from a service response field. */

export type Decision = "rejected_violation" | "accepted";

export type Verdict = "flag_as_violation" | "flag_as_non_violation";

export interface ContributionJson {
  feature: string;
  coeff: number;
  value: number;
  product: number;
}

export interface TaxonomyNodeJson {
  name: string;
  description: string;
  feature?: string;
  children?: TaxonomyNodeJson[];
}

export interface TaxonomyJson {
  norm: string;
  root: TaxonomyNodeJson;
  comments?: Record<string, string>;
}

export interface ReportJson {
  probability: number;
  intercept: number;
  contributions: ContributionJson[];
  relevant: string[];
  other_positive: string[];
  taxonomy_fragment: TaxonomyJson;
  descriptions: Record<string, string>;
  flags: string[];
}

export interface ActionJson {
  action_id: string;
  actor_id: string;
  features: Record<string, number>;
  raw_context: string | null;
}

export interface FeedbackJson {
  member_id: string;
  verdict: Verdict;
  comment: string | null;
  at: string;
}

export interface DecisionRecordJson {
  record_id: string;
  action: ActionJson;
  probability: number;
  decision: Decision;
  report: ReportJson | null;
  model_version: string;
  threshold: number;
  created_at: string;
  feedback: FeedbackJson[];
}

export interface RecordPageJson {
  records: DecisionRecordJson[];
  page: number;
  page_size: number;
  total: number;
}

export interface ConfusionJson {
  tp: number;
  fp: number;
  tn: number;
  fn: number;
}

export interface MetricsJson {
  evaluated: number;
  rejected: number;
  accepted: number;
  flagged: number;
  model_version: string;
  threshold: number;
  confusion: ConfusionJson | null;
}

// ------------------------------------------------------------- view model

export interface StarredFeature {
  feature: string;
  product: number;
  description: string;
}

/** A decision record prepared for display. */
export interface RecordView {
  raw: DecisionRecordJson;
  badge: "REJECTED" | "ACCEPTED";
  /** report.relevant, ordered by server-reported contribution descending. */
  starred: StarredFeature[];
  flagCount: number;
  degenerate: boolean;
}

export interface FeedbackFormData {
  memberId: string;
  verdict: Verdict | null;
  comment: string;
}

/** The starred list mirrors report.relevant exactly (same names, nothing
 * added or dropped), ordered by the contribution products the server
 * reported.  Descriptions come from the report's own description map. */
export function toRecordView(raw: DecisionRecordJson): RecordView {
  const report = raw.report;
  let starred: StarredFeature[] = [];
  if (report !== null) {
    const productOf = new Map(report.contributions.map((c) => [c.feature, c.product]));
    starred = report.relevant
      .map((feature) => ({
        feature,
        product: productOf.get(feature) ?? 0,
        description: report.descriptions[feature] ?? "",
      }))
      .sort((a, b) => b.product - a.product);
  }
  return {
    raw,
    badge: raw.decision === "rejected_violation" ? "REJECTED" : "ACCEPTED",
    starred,
    flagCount: raw.feedback.length,
    degenerate: report !== null && report.flags.includes("degenerate_relevance"),
  };
}

export function formDataValid(form: FeedbackFormData): boolean {
  return form.verdict !== null && form.memberId.trim().length > 0;
}
