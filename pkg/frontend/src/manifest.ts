/* Study manifest schema and validation.
 *
 * The manifest is produced by the study-preparation tool; each item carries
 * the full shuffled candidate list with anonymous codes. The UI must present
 * candidates in exactly this order and must never display method names.
 */

export interface Candidate {
  code: string;
  method: string;
  file: string;
}

export interface StudyItem {
  image_id: string;
  candidates: Candidate[];
}

export interface StudyManifest {
  study_id: string;
  methods: string[];
  shuffle_seed: number;
  items: StudyItem[];
}

export class ManifestError extends Error {}

function fail(message: string): never {
  throw new ManifestError(message);
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireString(value: unknown, what: string): string {
  if (typeof value !== "string" || value.length === 0) fail(`${what} must be a non-empty string`);
  return value;
}

export function parseManifest(json: string): StudyManifest {
  let doc: unknown;
  try {
    doc = JSON.parse(json);
  } catch (err) {
    fail(`manifest is not valid JSON: ${(err as Error).message}`);
  }
  if (!isRecord(doc)) fail("manifest root must be an object");

  const studyId = requireString(doc.study_id, "study_id");
  if (!Array.isArray(doc.methods) || doc.methods.length === 0) {
    fail("methods must be a non-empty array");
  }
  const methods = doc.methods.map((m, i) => requireString(m, `methods[${i}]`));
  if (new Set(methods).size !== methods.length) fail("methods must be unique");
  if (typeof doc.shuffle_seed !== "number") fail("shuffle_seed must be a number");
  if (!Array.isArray(doc.items) || doc.items.length === 0) {
    fail("items must be a non-empty array");
  }

  const items: StudyItem[] = doc.items.map((raw, idx) => {
    if (!isRecord(raw)) fail(`items[${idx}] must be an object`);
    const imageId = requireString(raw.image_id, `items[${idx}].image_id`);
    if (!Array.isArray(raw.candidates) || raw.candidates.length !== methods.length) {
      fail(`items[${idx}] must present exactly ${methods.length} candidates`);
    }
    const candidates: Candidate[] = raw.candidates.map((c, j) => {
      if (!isRecord(c)) fail(`items[${idx}].candidates[${j}] must be an object`);
      return {
        code: requireString(c.code, `items[${idx}].candidates[${j}].code`),
        method: requireString(c.method, `items[${idx}].candidates[${j}].method`),
        file: requireString(c.file, `items[${idx}].candidates[${j}].file`),
      };
    });
    const codes = new Set(candidates.map((c) => c.code));
    if (codes.size !== candidates.length) fail(`items[${idx}] has duplicate candidate codes`);
    const seen = new Set(candidates.map((c) => c.method));
    for (const m of methods) {
      if (!seen.has(m)) fail(`items[${idx}] is missing method ${m}`);
    }
    return { image_id: imageId, candidates };
  });

  return { study_id: studyId, methods, shuffle_seed: doc.shuffle_seed, items };
}
