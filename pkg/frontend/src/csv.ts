/* Rank CSV export: the exact format the aggregation tool consumes. */

import { Session, SessionError } from "./session.js";

export const RANK_CSV_HEADER = "participant,image,method,rank";

function escapeField(value: string): string {
  if (/[",\n\r]/.test(value)) {
    return '"' + value.replace(/"/g, '""') + '"';
  }
  return value;
}

/** CSV text with real method names restored; requires every item submitted. */
export function exportRanks(session: Session): string {
  if (!session.allSubmitted()) {
    throw new SessionError("cannot export: not every item has been submitted");
  }
  const lines = [RANK_CSV_HEADER];
  session.manifest.items.forEach((item, index) => {
    const ranks = session.methodRanks(index);
    for (const method of session.manifest.methods) {
      const rank = ranks.get(method);
      lines.push(
        [
          escapeField(session.participantId),
          escapeField(item.image_id),
          escapeField(method),
          String(rank),
        ].join(",")
      );
    }
  });
  return lines.join("\n") + "\n";
}
