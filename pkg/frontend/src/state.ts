/**
 * View model derived from the server session state.
 *
 * Everything is recomputed from the authoritative SessionState after each
 * turn; the panels render this derivation and keep no truth of their own.
 */
import type { FeedbackEvent, SessionState, TurnRecord } from './api.js';

export interface ChatEntry {
  role: 'learner' | 'tutor';
  text: string;
  /** set when this entry links to a counterfactual artifact in panel C */
  artifactHash?: string;
  turnIndex: number;
}

export interface RevealCard {
  requirementId: string;
  text: string;
  turnIndex: number;
}

export interface CounterfactualView {
  artifactHash: string | null;
  description: string;
  turnIndex: number;
}

export interface ViewModel {
  chat: ChatEntry[];
  reveals: RevealCard[];
  counterfactual: CounterfactualView | null;
  document: string[];
  keywords: string[];
  ended: boolean;
}

function systemEvents(turn: TurnRecord): FeedbackEvent[] {
  return turn.payload.events ?? [];
}

export function deriveViewModel(state: SessionState): ViewModel {
  const chat: ChatEntry[] = [];
  const reveals: RevealCard[] = [];
  let counterfactual: CounterfactualView | null = null;

  for (const turn of state.turns) {
    if (turn.role === 'learner') {
      const doc = turn.payload.document ?? [];
      chat.push({ role: 'learner', text: doc.join('\n'), turnIndex: turn.index });
      continue;
    }
    if (turn.payload.message) {
      chat.push({ role: 'tutor', text: turn.payload.message, turnIndex: turn.index });
    }
    for (const event of systemEvents(turn)) {
      if (event.kind === 'chat_hint') {
        chat.push({ role: 'tutor', text: event.content, turnIndex: turn.index });
      } else if (event.kind === 'reference_reveal') {
        reveals.push({
          requirementId: event.target ?? '',
          text: event.content,
          turnIndex: turn.index,
        });
      } else {
        counterfactual = {
          artifactHash: event.artifact_hash,
          description: event.content,
          turnIndex: turn.index,
        };
        chat.push({
          role: 'tutor',
          text: `${event.content} (see output preview)`,
          artifactHash: event.artifact_hash ?? undefined,
          turnIndex: turn.index,
        });
      }
    }
  }

  // The server's revealed set is truth; rendered cards must stay a subset.
  const allowed = new Set(state.revealed);
  const visible = reveals.filter((card) => allowed.has(card.requirementId));

  return {
    chat,
    reveals: visible,
    counterfactual,
    document: [...state.working_doc],
    keywords: [...state.keywords],
    ended: state.status === 'ended',
  };
}

/** Byte-exact panel-to-wire mapping: lines in, lines out. */
export function documentFromText(text: string): string[] {
  return text.split('\n');
}

export function textFromDocument(document: string[]): string {
  return document.join('\n');
}

export function sameDocument(a: string[], b: string[]): boolean {
  return a.length === b.length && a.every((line, i) => line === b[i]);
}
