/**
 * The three training panels: chat (A), requirement working document (B),
 * output preview (C). Pure DOM builders; the app module owns data flow.
 */
import { highlightKeywords } from './highlight.js';
import type { ChatEntry, RevealCard, CounterfactualView } from './state.js';

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export interface ChatPanel {
  element: HTMLElement;
  render(entries: ChatEntry[], keywords: string[]): void;
  onArtifactLink(handler: (hash: string) => void): void;
}

export function createChatPanel(doc: Document): ChatPanel {
  const element = el(doc, 'section', 'panel panel-chat');
  element.appendChild(el(doc, 'h2', 'panel-title', 'Tutor chat'));
  const log = el(doc, 'div', 'chat-log');
  element.appendChild(log);
  let linkHandler: (hash: string) => void = () => undefined;

  return {
    element,
    render(entries, keywords) {
      log.textContent = '';
      for (const entry of entries) {
        const bubble = el(doc, 'div', `bubble bubble-${entry.role}`);
        bubble.appendChild(highlightKeywords(entry.text, keywords, doc));
        if (entry.artifactHash) {
          const link = el(doc, 'a', 'artifact-link', 'open in output preview');
          link.setAttribute('href', '#preview');
          link.dataset.artifact = entry.artifactHash;
          link.addEventListener('click', (event) => {
            event.preventDefault();
            linkHandler(entry.artifactHash as string);
          });
          bubble.appendChild(doc.createTextNode(' '));
          bubble.appendChild(link);
        }
        log.appendChild(bubble);
      }
      log.scrollTop = log.scrollHeight;
    },
    onArtifactLink(handler) {
      linkHandler = handler;
    },
  };
}

export interface DocumentPanel {
  element: HTMLElement;
  textarea: HTMLTextAreaElement;
  submitButton: HTMLButtonElement;
  renderReveals(cards: RevealCard[], keywords: string[]): void;
  setDocumentText(text: string): void;
  setReadOnly(readOnly: boolean): void;
}

export function createDocumentPanel(doc: Document): DocumentPanel {
  const element = el(doc, 'section', 'panel panel-document');
  element.appendChild(el(doc, 'h2', 'panel-title', 'Your requirements'));

  const textarea = el(doc, 'textarea', 'doc-editor');
  textarea.rows = 10;
  textarea.placeholder = 'One requirement per line';
  element.appendChild(textarea);

  const submitButton = el(doc, 'button', 'doc-submit', 'Submit requirements');
  element.appendChild(submitButton);

  element.appendChild(el(doc, 'h3', 'panel-subtitle', 'Reference cards'));
  const cardList = el(doc, 'div', 'reveal-cards');
  element.appendChild(cardList);

  return {
    element,
    textarea,
    submitButton,
    renderReveals(cards, keywords) {
      cardList.textContent = '';
      for (const card of cards) {
        const node = el(doc, 'div', 'reveal-card');
        node.dataset.requirement = card.requirementId;
        node.appendChild(highlightKeywords(card.text, keywords, doc));
        cardList.appendChild(node);
      }
    },
    setDocumentText(text) {
      textarea.value = text;
    },
    setReadOnly(readOnly) {
      textarea.readOnly = readOnly;
      submitButton.disabled = readOnly;
    },
  };
}

export interface PreviewPanel {
  element: HTMLElement;
  render(view: CounterfactualView | null, artifactText: string | null, keywords: string[]): void;
}

export function createPreviewPanel(doc: Document): PreviewPanel {
  const element = el(doc, 'section', 'panel panel-preview');
  element.id = 'preview';
  element.appendChild(el(doc, 'h2', 'panel-title', 'Output preview'));
  const caption = el(doc, 'p', 'preview-caption', 'No counterfactual yet.');
  element.appendChild(caption);
  const code = el(doc, 'pre', 'preview-artifact');
  element.appendChild(code);

  return {
    element,
    render(view, artifactText, keywords) {
      if (view === null) {
        caption.textContent = 'No counterfactual yet.';
        code.textContent = '';
        return;
      }
      caption.textContent = view.description;
      code.textContent = '';
      if (artifactText !== null) {
        code.appendChild(highlightKeywords(artifactText, keywords, doc));
      }
    },
  };
}

export interface Banner {
  element: HTMLElement;
  show(message: string): void;
  hide(): void;
}

export function createBanner(doc: Document): Banner {
  const element = el(doc, 'div', 'banner hidden');
  return {
    element,
    show(message) {
      element.textContent = message;
      element.classList.remove('hidden');
    },
    hide() {
      element.textContent = '';
      element.classList.add('hidden');
    },
  };
}
