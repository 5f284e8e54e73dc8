// Pure HTML renderers: every view is a string-in, string-out function
// so the suite can assert on output without a browser DOM.

import type { BuildingRow, CourseRow, EventRow, Session } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatDistance(meters: number): string {
  return `${meters.toFixed(1)} m`;
}

export function formatSlot(slot: { day: number; start_min: number; end_min: number }): string {
  const days = ["Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"];
  const hhmm = (m: number) =>
    `${String(Math.floor(m / 60)).padStart(2, "0")}:${String(m % 60).padStart(2, "0")}`;
  return `${days[slot.day]} ${hhmm(slot.start_min)}-${hhmm(slot.end_min)}`;
}

const ENROLL_MESSAGES: Record<string, string> = {
  UnknownCourse: "No such course.",
  DeadlinePassed: "The add/drop deadline has passed.",
  AlreadyEnrolled: "You are already enrolled in this course.",
  CourseFull: "This course is full.",
  ScheduleConflict: "This course conflicts with your schedule.",
  NotEnrolled: "You are not enrolled in this course.",
  Forbidden: "Your role does not permit this action.",
};

export function enrollErrorMessage(errorName: string): string {
  return ENROLL_MESSAGES[errorName] ?? `Request failed: ${errorName}`;
}

export function renderLoginForm(error?: { name: string; sipStatus?: string }): string {
  const notice = error
    ? `<p class="error" data-testid="login-error">Login rejected` +
      (error.sipStatus ? ` (SIP ${escapeHtml(error.sipStatus)})` : "") +
      `</p>`
    : "";
  return `<section class="login" data-view="login">
  <h1>Mobile Learning</h1>
  ${notice}
  <form id="login-form">
    <label>Identity <input name="impi" autocomplete="username"></label>
    <label>Key (hex) <input name="k" type="password"></label>
    <button type="submit">Sign in</button>
  </form>
</section>`;
}

export function renderDashboard(session: Session, courses: CourseRow[]): string {
  const rows = courses
    .map((c) => {
      const seats = `${c.enrolled}/${c.capacity}`;
      const slots = c.schedule.map(formatSlot).join(", ");
      const action = c.is_enrolled
        ? `<button data-action="drop" data-code="${escapeHtml(c.code)}">Drop</button>`
        : `<button data-action="enroll" data-code="${escapeHtml(c.code)}">Enroll</button>`;
      return `<tr data-code="${escapeHtml(c.code)}" data-enrolled="${c.is_enrolled}">
  <td>${escapeHtml(c.code)}</td><td>${escapeHtml(c.title)}</td>
  <td>${seats}</td><td>${escapeHtml(slots)}</td><td>${action}</td>
</tr>`;
    })
    .join("\n");
  return `<section class="dashboard" data-view="dashboard">
  <header>
    <span data-testid="student-id">${escapeHtml(session.student_id)}</span>
    <button id="logout">Sign out</button>
  </header>
  <p class="flash" id="flash"></p>
  <table class="courses">
    <thead><tr><th>Code</th><th>Title</th><th>Seats</th><th>Schedule</th><th></th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <nav><button id="show-events">Events</button><button id="show-buildings">Buildings</button></nav>
  <div id="panel"></div>
</section>`;
}

export function groupEventsByDay(events: EventRow[]): Map<string, EventRow[]> {
  const grouped = new Map<string, EventRow[]>();
  for (const ev of events) {
    const day = ev.start.slice(0, 10);
    const bucket = grouped.get(day);
    if (bucket) bucket.push(ev);
    else grouped.set(day, [ev]);
  }
  return grouped;
}

export function renderEvents(events: EventRow[]): string {
  if (events.length === 0) {
    return `<p data-testid="no-events">No events in this window.</p>`;
  }
  const sections: string[] = [];
  for (const [day, dayEvents] of groupEventsByDay(events)) {
    const items = dayEvents
      .map(
        (ev) =>
          `<li data-id="${escapeHtml(ev.id)}" class="event-${escapeHtml(ev.kind)}">` +
          `${ev.start.slice(11, 16)} ${escapeHtml(ev.title)}` +
          (ev.course_code ? ` <em>${escapeHtml(ev.course_code)}</em>` : "") +
          `</li>`,
      )
      .join("");
    sections.push(`<h3>${day}</h3><ul>${items}</ul>`);
  }
  return `<div data-view="events">${sections.join("\n")}</div>`;
}

export function renderBuildings(rows: BuildingRow[]): string {
  if (rows.length === 0) {
    return `<p data-testid="no-buildings">No buildings match.</p>`;
  }
  const items = rows
    .map(
      (b) =>
        `<li data-id="${escapeHtml(b.id)}">` +
        `${escapeHtml(b.number)} ${escapeHtml(b.name)} ` +
        `<span class="distance">${formatDistance(b.distance_m)}</span></li>`,
    )
    .join("");
  return `<ol data-view="buildings">${items}</ol>`;
}
