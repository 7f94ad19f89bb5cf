/** Bootstrap: wire the console to the service this page was served from. */

import { ApiClient } from "./api.js";
import { SessionApp } from "./app.js";

function need(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const app = new SessionApp(api, {
    strip: need("strip"),
    round: need("round"),
    spark: need("spark"),
    summary: need("summary"),
    banner: need("banner"),
  });

  const episodeSelect = need("episode") as HTMLSelectElement;
  const modeSelect = need("mode") as HTMLSelectElement;
  const startButton = need("start") as HTMLButtonElement;

  const meta = await api.meta();
  for (let i = 0; i < meta.n_episodes; i += 1) {
    const option = document.createElement("option");
    option.value = String(i);
    option.textContent = `episode ${i + 1} (T=${meta.horizons[i]})`;
    episodeSelect.appendChild(option);
  }
  need("version").textContent = `framepick ${meta.tool_version} · suite ${meta.suite_hash}`;

  startButton.addEventListener("click", () => {
    startButton.disabled = true;
    void app
      .start(Number(episodeSelect.value), modeSelect.value)
      .finally(() => {
        startButton.disabled = false;
      });
  });
}

void boot();
