/**
 * Session view wiring: renders one live training session into a container.
 *
 * The server is the single source of truth; after every turn the whole view
 * re-derives from the returned state. Connection loss flips the view into a
 * read-only banner state and polls until the server answers again.
 */
import { ApiClient, SessionState } from './api.js';
import { linkKeywordMarks } from './highlight.js';
import {
  createBanner,
  createChatPanel,
  createDocumentPanel,
  createPreviewPanel,
} from './panels.js';
import {
  deriveViewModel,
  documentFromText,
  sameDocument,
  textFromDocument,
} from './state.js';

export interface SessionView {
  root: HTMLElement;
  /** re-render from a fresh server state (also used by tests and replays) */
  update(state: SessionState): Promise<void>;
  submit(): Promise<void>;
  refresh(): Promise<void>;
}

export interface SessionViewOptions {
  /** polling interval for auto-resume after connection loss, in ms */
  resumeIntervalMs?: number;
}

export function renderSession(
  api: ApiClient,
  initialState: SessionState,
  doc: Document,
  options: SessionViewOptions = {},
): SessionView {
  const root = doc.createElement('div');
  root.className = 'session-view';

  const banner = createBanner(doc);
  const chat = createChatPanel(doc);
  const documentPanel = createDocumentPanel(doc);
  const preview = createPreviewPanel(doc);
  root.appendChild(banner.element);
  const panels = doc.createElement('div');
  panels.className = 'panels';
  panels.appendChild(chat.element);
  panels.appendChild(documentPanel.element);
  panels.appendChild(preview.element);
  root.appendChild(panels);
  linkKeywordMarks(root);

  let state = initialState;
  let lastSubmitted: string[] = [...initialState.working_doc];
  let offline = false;
  const artifactCache = new Map<string, string>();

  async function artifactText(hash: string | null): Promise<string | null> {
    if (hash === null) return null;
    if (!artifactCache.has(hash)) {
      artifactCache.set(hash, await api.getArtifact(hash));
    }
    return artifactCache.get(hash) ?? null;
  }

  async function update(next: SessionState): Promise<void> {
    state = next;
    const view = deriveViewModel(state);
    chat.render(view.chat, view.keywords);
    documentPanel.renderReveals(view.reveals, view.keywords);
    let payload: string | null = null;
    if (view.counterfactual) {
      try {
        payload = await artifactText(view.counterfactual.artifactHash);
      } catch {
        payload = '(artifact unavailable)';
      }
    }
    preview.render(view.counterfactual, payload, view.keywords);
    documentPanel.setReadOnly(view.ended || offline);
  }

  function goOffline(): void {
    if (offline) return;
    offline = true;
    banner.show('Connection lost. The session is read-only; retrying...');
    documentPanel.setReadOnly(true);
    const interval = options.resumeIntervalMs ?? 3000;
    const timer = setInterval(async () => {
      try {
        const fresh = await api.getSession(state.session_id);
        clearInterval(timer);
        offline = false;
        banner.hide();
        await update(fresh);
      } catch {
        // still down, keep polling
      }
    }, interval);
  }

  async function submit(): Promise<void> {
    const document = documentFromText(documentPanel.textarea.value);
    if (sameDocument(document, lastSubmitted)) {
      return; // unchanged document: no duplicate turn
    }
    documentPanel.submitButton.disabled = true;
    try {
      const response = await api.postTurn(state.session_id, document);
      lastSubmitted = document;
      await update(response.state);
    } catch {
      goOffline();
    } finally {
      if (!offline && state.status === 'active') {
        documentPanel.submitButton.disabled = false;
      }
    }
  }

  documentPanel.submitButton.addEventListener('click', () => {
    void submit();
  });
  chat.onArtifactLink(() => {
    preview.element.scrollIntoView?.({ behavior: 'smooth' });
  });

  documentPanel.setDocumentText(textFromDocument(initialState.working_doc));
  void update(initialState);

  return {
    root,
    update,
    submit,
    refresh: async () => {
      try {
        await update(await api.getSession(state.session_id));
      } catch {
        goOffline();
      }
    },
  };
}

/** Entry point: attach a session to the page for a given API base URL. */
export async function mountSession(
  apiBaseUrl: string,
  sessionId: string,
  container: HTMLElement,
): Promise<SessionView> {
  const api = new ApiClient(apiBaseUrl);
  const state = await api.getSession(sessionId);
  const view = renderSession(api, state, container.ownerDocument);
  container.appendChild(view.root);
  return view;
}
