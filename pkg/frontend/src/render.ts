/** Pure HTML rendering: same ViewState, same page string. */

import type { DocumentCard, Entity, SentenceHit } from "./api.js";
import type { ViewState } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Wrap each [start, end) range in <mark>, escaping every segment. */
export function renderHighlighted(sentence: SentenceHit): string {
  const parts: string[] = [];
  let cursor = 0;
  for (const [start, end] of sentence.highlights) {
    parts.push(escapeHtml(sentence.text.slice(cursor, start)));
    parts.push(`<mark>${escapeHtml(sentence.text.slice(start, end))}</mark>`);
    cursor = end;
  }
  parts.push(escapeHtml(sentence.text.slice(cursor)));
  return parts.join("");
}

function renderEntity(entity: Entity): string {
  if (entity.kind === "kb") {
    return (
      `<article class="entity entity-kb">` +
      `<a href="${escapeHtml(entity.url)}" rel="noopener">${escapeHtml(entity.label)}</a>` +
      ` <span class="entity-id">${escapeHtml(entity.kb_id)}</span>` +
      ` <span class="entity-via">via ${escapeHtml(entity.matched_via)}</span>` +
      `<p class="entity-description">${escapeHtml(entity.description)}</p>` +
      `</article>`
    );
  }
  return (
    `<article class="entity entity-encyclopedia">` +
    `<a href="${escapeHtml(entity.url)}" rel="noopener">${escapeHtml(entity.label)}</a>` +
    ` <span class="entity-via">encyclopedia entry (${escapeHtml(entity.corpus_id)})</span>` +
    `</article>`
  );
}

function renderDocument(doc: DocumentCard): string {
  const sentences = doc.sentences
    .map(
      (s) =>
        `<li class="sentence"><span class="ordinal">(${s.ordinal})</span> ` +
        `${renderHighlighted(s)}</li>`,
    )
    .join("");
  const truncated = doc.truncated
    ? `<p class="truncated">only the first matching sentences are shown</p>`
    : "";
  return (
    `<article class="document" data-doc="${escapeHtml(doc.doc_id)}">` +
    `<h3><a href="${escapeHtml(doc.source_url)}" rel="noopener">${escapeHtml(doc.title)}</a></h3>` +
    `<p class="doc-id">${escapeHtml(doc.doc_id)}</p>` +
    `<ul class="sentences">${sentences}</ul>` +
    truncated +
    `</article>`
  );
}

function displayName(state: ViewState, corpusId: string): string {
  const info = state.corpora.find((c) => c.id === corpusId);
  return info ? info.display_name : corpusId;
}

/**
 * Render the results area. Entity cards always come first, followed by
 * one section per visible corpus in the order the server sent them.
 * An error replaces the whole area with a banner: no partial render.
 */
export function renderPage(state: ViewState): string {
  if (state.error !== null) {
    return `<div class="banner banner-error" role="alert">${escapeHtml(state.error)}</div>`;
  }
  const pieces: string[] = [];
  if (state.loading) {
    pieces.push(`<p class="status" aria-busy="true">searching…</p>`);
  }
  const response = state.response;
  if (response === null) {
    if (!state.loading) {
      pieces.push(`<p class="status">Type a phrase and press Enter.</p>`);
    }
    return pieces.join("");
  }
  for (const warning of response.warnings) {
    pieces.push(`<div class="banner banner-warning">${escapeHtml(warning)}</div>`);
  }
  if (response.entities.length > 0) {
    pieces.push(
      `<section class="entities"><h2>Knowledge base</h2>` +
        response.entities.map(renderEntity).join("") +
        `</section>`,
    );
  }
  for (const section of response.per_corpus) {
    if (!state.visible.has(section.corpus_id)) continue;
    const body =
      section.documents.length === 0
        ? `<p class="no-results">no results</p>`
        : section.documents.map(renderDocument).join("");
    pieces.push(
      `<section class="corpus" data-corpus="${escapeHtml(section.corpus_id)}">` +
        `<h2>${escapeHtml(displayName(state, section.corpus_id))}</h2>` +
        body +
        `</section>`,
    );
  }
  return pieces.join("");
}

/** Checkbox row controlling section visibility; checked mirrors the state. */
export function renderToggles(state: ViewState): string {
  if (state.corpora.length === 0) return "";
  const boxes = state.corpora
    .map(
      (c) =>
        `<label class="toggle"><input type="checkbox" data-corpus="${escapeHtml(c.id)}"` +
        `${state.visible.has(c.id) ? " checked" : ""}> ${escapeHtml(c.display_name)}` +
        ` <span class="corpus-size">(${c.documents} docs)</span></label>`,
    )
    .join("");
  return `<fieldset class="toggles"><legend>Corpora</legend>${boxes}</fieldset>`;
}
