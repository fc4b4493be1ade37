/** Test doubles: fixture loading and a small stateful fake of the
 * moderation service covering the routes the client uses. */

import { readFileSync } from "node:fs";

import type { FetchLike } from "../src/api.js";
import type {
  DecisionRecordJson,
  FeedbackJson,
  RecordPageJson,
  Verdict,
} from "../src/types.js";

export function loadFixtureRecord(): DecisionRecordJson {
  const url = new URL("./fixtures/example_decision_record.json", import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as DecisionRecordJson;
}

/** Deep-copied variant helpers so tests can derive accepted/degenerate
 * records from the one recorded fixture. */
export function clone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

export function acceptedVariant(record: DecisionRecordJson, id: string): DecisionRecordJson {
  const out = clone(record);
  out.record_id = id;
  out.action.action_id = `${out.action.action_id}-${id}`;
  out.decision = "accepted";
  out.probability = 0.04;
  out.report = null;
  out.feedback = [];
  return out;
}

interface JsonResponse {
  status: number;
  body: unknown;
}

function respond({ status, body }: JsonResponse): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface FakeService {
  fetchFn: FetchLike;
  records: Map<string, DecisionRecordJson>;
  requests: string[];
}

/** Implements GET /records (decision/flagged/page/page_size filters),
 * GET /records/{id} and POST /records/{id}/feedback with the same error
 * bodies the real service sends. */
export function makeFakeService(initial: DecisionRecordJson[]): FakeService {
  const records = new Map(initial.map((r) => [r.record_id, clone(r)]));
  const requests: string[] = [];

  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const parsed = new URL(url, "http://fake");
    requests.push(`${method} ${parsed.pathname}${parsed.search}`);

    const feedbackMatch = parsed.pathname.match(/^\/records\/([^/]+)\/feedback$/);
    if (method === "POST" && feedbackMatch) {
      const record = records.get(feedbackMatch[1]!);
      if (record === undefined) {
        return respond({
          status: 404,
          body: { error: "UnknownRecord", detail: `no record '${feedbackMatch[1]}'` },
        });
      }
      const body = JSON.parse(String(init?.body)) as {
        member_id: string;
        verdict: Verdict;
        comment: string | null;
      };
      if (record.feedback.some((f) => f.member_id === body.member_id)) {
        return respond({
          status: 409,
          body: {
            error: "DuplicateFlag",
            detail: `member '${body.member_id}' already flagged '${record.record_id}'`,
          },
        });
      }
      const flag: FeedbackJson = {
        member_id: body.member_id,
        verdict: body.verdict,
        comment: body.comment,
        at: "2026-08-14T13:00:00+00:00",
      };
      record.feedback = [...record.feedback, flag];
      return respond({ status: 200, body: record });
    }

    const recordMatch = parsed.pathname.match(/^\/records\/([^/]+)$/);
    if (method === "GET" && recordMatch) {
      const record = records.get(recordMatch[1]!);
      if (record === undefined) {
        return respond({
          status: 404,
          body: { error: "UnknownRecord", detail: `no record '${recordMatch[1]}'` },
        });
      }
      return respond({ status: 200, body: record });
    }

    if (method === "GET" && parsed.pathname === "/records") {
      let rows = [...records.values()];
      const decision = parsed.searchParams.get("decision");
      if (decision !== null) rows = rows.filter((r) => r.decision === decision);
      const flagged = parsed.searchParams.get("flagged");
      if (flagged !== null) rows = rows.filter((r) => (r.feedback.length > 0) === (flagged === "true"));
      rows.sort((a, b) => (a.record_id < b.record_id ? 1 : -1)); // newest first
      const page = Number(parsed.searchParams.get("page") ?? "1");
      const pageSize = Number(parsed.searchParams.get("page_size") ?? "20");
      const body: RecordPageJson = {
        records: rows.slice((page - 1) * pageSize, page * pageSize),
        page,
        page_size: pageSize,
        total: rows.length,
      };
      return respond({ status: 200, body });
    }

    return respond({ status: 404, body: { error: "UnknownRecord", detail: "no route" } });
  };

  return { fetchFn, records, requests };
}

/** A fetch that never reaches a server. */
export const offlineFetch: FetchLike = async () => {
  throw new TypeError("fetch failed: network down");
};
