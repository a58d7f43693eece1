/**
 * Page bootstrap: task picker, then the three-panel session view.
 */
import { ApiClient } from './api.js';
import { renderSession } from './app.js';

const API_BASE = (window as { ROPETRAIN_API?: string }).ROPETRAIN_API ?? 'http://127.0.0.1:8000';

async function boot(): Promise<void> {
  const container = document.getElementById('app');
  if (!container) return;
  const api = new ApiClient(API_BASE);

  const picker = document.createElement('div');
  picker.className = 'task-picker';
  picker.appendChild(Object.assign(document.createElement('h1'), { textContent: 'Pick a task' }));
  container.appendChild(picker);

  const tasks = await api.listTasks();
  for (const task of tasks) {
    const button = document.createElement('button');
    button.textContent = `${task.title} (${task.kind})`;
    button.addEventListener('click', async () => {
      const state = await api.startSession(task.id);
      picker.remove();
      const view = renderSession(api, state, document);
      container.appendChild(view.root);
    });
    picker.appendChild(button);
  }
}

void boot();
