/**
 * Canned API stub: serves a recorded session fixture and scripted turn
 * responses entirely in memory, capturing every request body it sees.
 */
import type { FetchLike, SessionState, TurnResponse } from '../src/api.js';

export interface StubOptions {
  state: SessionState;
  artifacts?: Record<string, string>;
  turnResponses?: TurnResponse[];
  failNetwork?: boolean;
}

export interface ApiStub {
  fetchFn: FetchLike;
  requests: { method: string; path: string; body?: unknown }[];
  options: StubOptions;
}

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

export function createApiStub(options: StubOptions): ApiStub {
  const requests: ApiStub['requests'] = [];
  let turnCursor = 0;

  const fetchFn: FetchLike = async (input, init) => {
    const url = new URL(input, 'http://stub.local');
    const path = url.pathname;
    const method = init?.method ?? 'GET';
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    requests.push({ method, path, body });

    if (options.failNetwork) {
      throw new TypeError('network unreachable');
    }
    if (method === 'GET' && path.startsWith('/artifacts/')) {
      const hash = path.slice('/artifacts/'.length);
      const artifact = options.artifacts?.[hash];
      if (artifact === undefined) {
        return jsonResponse({ detail: 'not found' }, 404);
      }
      return new Response(artifact, { status: 200 });
    }
    if (method === 'GET' && path.startsWith('/sessions/')) {
      return jsonResponse(options.state);
    }
    if (method === 'POST' && path.endsWith('/turns')) {
      const scripted = options.turnResponses?.[turnCursor];
      if (!scripted) {
        return jsonResponse({ detail: 'no scripted turn' }, 500);
      }
      turnCursor += 1;
      options.state = scripted.state;
      return jsonResponse(scripted);
    }
    return jsonResponse({ detail: `unstubbed ${method} ${path}` }, 500);
  };

  return { fetchFn, requests, options };
}
