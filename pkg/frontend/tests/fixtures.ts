import { StudyManifest } from "../src/manifest.js";

/** Two-item, three-method study with per-item shuffled candidate orders. */
export function studyFixture(): StudyManifest {
  return {
    study_id: "mor-fixture01",
    methods: ["ours", "baseline", "classic"],
    shuffle_seed: 5,
    items: [
      {
        image_id: "face1.png",
        candidates: [
          { code: "A", method: "baseline", file: "baseline/face1.png" },
          { code: "B", method: "ours", file: "ours/face1.png" },
          { code: "C", method: "classic", file: "classic/face1.png" },
        ],
      },
      {
        image_id: "face2.png",
        candidates: [
          { code: "A", method: "classic", file: "classic/face2.png" },
          { code: "B", method: "baseline", file: "baseline/face2.png" },
          { code: "C", method: "ours", file: "ours/face2.png" },
        ],
      },
    ],
  };
}

export function studyFixtureJson(): string {
  return JSON.stringify(studyFixture());
}
