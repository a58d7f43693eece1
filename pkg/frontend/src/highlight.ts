/**
 * Bundle keyword highlighting with cross-panel linking.
 *
 * Keywords from the task bundle render as clickable marks; clicking one
 * flashes every occurrence of the same keyword in the other panels.
 */

export function highlightKeywords(text: string, keywords: string[], doc: Document): DocumentFragment {
  const fragment = doc.createDocumentFragment();
  if (keywords.length === 0) {
    fragment.appendChild(doc.createTextNode(text));
    return fragment;
  }
  const escaped = keywords
    .slice()
    .sort((a, b) => b.length - a.length)
    .map((k) => k.replace(/[.*+?^${}()|[\]\\]/g, '\\$&'));
  const pattern = new RegExp(`(${escaped.join('|')})`, 'gi');

  let last = 0;
  for (const match of text.matchAll(pattern)) {
    const start = match.index ?? 0;
    if (start > last) {
      fragment.appendChild(doc.createTextNode(text.slice(last, start)));
    }
    const mark = doc.createElement('mark');
    mark.className = 'keyword';
    mark.dataset.keyword = match[0].toLowerCase();
    mark.textContent = match[0];
    fragment.appendChild(mark);
    last = start + match[0].length;
  }
  if (last < text.length) {
    fragment.appendChild(doc.createTextNode(text.slice(last)));
  }
  return fragment;
}

/** Wire click-to-flash linking across every .keyword mark under root. */
export function linkKeywordMarks(root: HTMLElement): void {
  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement | null;
    if (!target || !target.classList.contains('keyword')) {
      return;
    }
    const keyword = target.dataset.keyword;
    root.querySelectorAll<HTMLElement>('.keyword').forEach((mark) => {
      mark.classList.toggle('flash', mark.dataset.keyword === keyword);
    });
  });
}
