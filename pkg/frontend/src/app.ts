// Browser wiring: mounts the string views into #app and binds events.
// All state lives on the server; after every mutation the course list
// is refetched rather than patched locally.

import { ApiError, Client } from "./api.js";
import type { Session } from "./api.js";
import {
  enrollErrorMessage,
  renderBuildings,
  renderDashboard,
  renderEvents,
  renderLoginForm,
} from "./views.js";

const client = new Client("");
let session: Session | null = null;

function root(): HTMLElement {
  const el = document.getElementById("app");
  if (!el) throw new Error("missing #app mount point");
  return el;
}

function showLogin(error?: { name: string; sipStatus?: string }): void {
  root().innerHTML = renderLoginForm(error);
  const form = document.getElementById("login-form") as HTMLFormElement;
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    try {
      session = await client.login(String(data.get("impi")), String(data.get("k")));
      await showDashboard();
    } catch (err) {
      if (err instanceof ApiError) {
        showLogin({ name: err.errorName, sipStatus: err.sipStatus });
      } else {
        throw err;
      }
    }
  });
}

async function showDashboard(flash = ""): Promise<void> {
  if (!session) return showLogin();
  const courses = await client.courses();
  root().innerHTML = renderDashboard(session, courses);
  const flashEl = document.getElementById("flash");
  if (flashEl) flashEl.textContent = flash;

  document.getElementById("logout")?.addEventListener("click", async () => {
    await client.logout();
    session = null;
    showLogin();
  });

  for (const button of root().querySelectorAll<HTMLButtonElement>("button[data-action]")) {
    button.addEventListener("click", async () => {
      const code = button.dataset.code ?? "";
      try {
        if (button.dataset.action === "enroll") await client.enroll(code);
        else await client.drop(code);
        await showDashboard();
      } catch (err) {
        if (err instanceof ApiError) {
          await showDashboard(enrollErrorMessage(err.errorName));
        } else {
          throw err;
        }
      }
    });
  }

  document.getElementById("show-events")?.addEventListener("click", async () => {
    const now = new Date();
    const to = new Date(now.getTime() + 14 * 86_400_000);
    const events = await client.events(now.toISOString(), to.toISOString());
    const panel = document.getElementById("panel");
    if (panel) panel.innerHTML = renderEvents(events);
  });

  document.getElementById("show-buildings")?.addEventListener("click", async () => {
    const q = window.prompt("Building name contains:") ?? "";
    const pos = await new Promise<GeolocationPosition>((resolve, reject) =>
      navigator.geolocation.getCurrentPosition(resolve, reject),
    ).catch(() => null);
    const lat = pos?.coords.latitude ?? 21.4957;
    const lon = pos?.coords.longitude ?? 39.2458;
    const rows = await client.buildings(q, lat, lon);
    const panel = document.getElementById("panel");
    if (panel) panel.innerHTML = renderBuildings(rows);
  });
}

showLogin();
