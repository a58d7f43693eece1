/**
 * Typed client for the training session API.
 *
 * The UI performs no grading or feedback logic of its own: every verdict,
 * reveal, and artifact it shows originates from these endpoints.
 */

export type FeedbackKind = 'chat_hint' | 'reference_reveal' | 'output_counterfactual';

export interface FeedbackEvent {
  kind: FeedbackKind;
  target: string | null;
  content: string;
  turn_index: number;
  artifact_hash: string | null;
}

export interface TurnRecord {
  index: number;
  role: 'learner' | 'system';
  payload: {
    message?: string;
    document?: string[];
    events?: FeedbackEvent[];
  };
  ts: number;
}

export interface SessionState {
  session_id: string;
  task_id: string;
  status: 'active' | 'ended';
  turns: TurnRecord[];
  working_doc: string[];
  revealed: string[];
  latest_assessment: unknown;
  keywords: string[];
}

export interface TaskInfo {
  id: string;
  kind: string;
  title: string;
}

export interface TurnResponse {
  events: FeedbackEvent[];
  state: SessionState;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      throw new Error(`${init?.method ?? 'GET'} ${path} failed: ${response.status}`);
    }
    return (await response.json()) as T;
  }

  listTasks(): Promise<TaskInfo[]> {
    return this.request<TaskInfo[]>('/tasks');
  }

  startSession(taskId: string): Promise<SessionState> {
    return this.request<SessionState>(`/tasks/${taskId}/sessions`, { method: 'POST' });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request<SessionState>(`/sessions/${sessionId}`);
  }

  postTurn(sessionId: string, document: string[]): Promise<TurnResponse> {
    return this.request<TurnResponse>(`/sessions/${sessionId}/turns`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ document }),
    });
  }

  endSession(sessionId: string): Promise<unknown> {
    return this.request(`/sessions/${sessionId}/end`, { method: 'POST' });
  }

  async getArtifact(hash: string): Promise<string> {
    const response = await this.fetchFn(`${this.baseUrl}/artifacts/${hash}`);
    if (!response.ok) {
      throw new Error(`GET /artifacts/${hash} failed: ${response.status}`);
    }
    return response.text();
  }
}
