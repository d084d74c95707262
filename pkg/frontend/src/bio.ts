// Client-side BIO validation, mirroring the server rule exactly: an I-X tag
// must continue a span, i.e. the previous tag is B-X or I-X of the same
// type.  The server also checks label membership and tag count, so both are
// mirrored here even though the per-token picker cannot produce them.

export function bioError(
  tags: readonly string[],
  labels: readonly string[],
  tokenCount: number
): string | null {
  if (tags.length !== tokenCount) {
    return `${tags.length} tags for ${tokenCount} tokens`;
  }
  const known = new Set(labels);
  for (const tag of tags) {
    if (!known.has(tag)) return `unknown label ${tag}`;
  }
  for (let pos = 0; pos < tags.length; pos++) {
    const tag = tags[pos];
    if (!tag.startsWith("I-")) continue;
    const etype = tag.slice(2);
    const prev = pos > 0 ? tags[pos - 1] : null;
    const continues =
      prev !== null && prev !== "O" && prev.slice(2) === etype;
    if (!continues) {
      return `I-${etype} at position ${pos} does not continue a ${etype} span`;
    }
  }
  return null;
}

export function isBioValid(
  tags: readonly string[],
  labels: readonly string[],
  tokenCount: number
): boolean {
  return bioError(tags, labels, tokenCount) === null;
}
