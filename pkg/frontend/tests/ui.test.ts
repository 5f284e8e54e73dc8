// End-to-end suite against a live gateway (spawned in setup.ts).

import { describe, expect, it } from "vitest";

import { ApiError, Client } from "../src/api.js";
import {
  enrollErrorMessage,
  formatDistance,
  groupEventsByDay,
  renderBuildings,
  renderDashboard,
  renderEvents,
  renderLoginForm,
} from "../src/views.js";
import { BASE_URL } from "./setup.js";

const STUDENT_1 = { impi: "s1001@ims.kau.example", k: "000102030405060708090a0b0c0d0e0f" };
const STUDENT_2 = { impi: "s1002@ims.kau.example", k: "101112131415161718191a1b1c1d1e1f" };
const STUDENT_3 = { impi: "s1003@ims.kau.example", k: "202122232425262728292a2b2c2d2e2f" };

describe("login", () => {
  it("renders the dashboard after a 200 registration", async () => {
    const client = new Client(BASE_URL);
    const session = await client.login(STUDENT_1.impi, STUDENT_1.k);
    expect(session.token).toHaveLength(32);
    const courses = await client.courses();
    const html = renderDashboard(session, courses);
    expect(html).toContain('data-view="dashboard"');
    expect(html).toContain('data-testid="student-id">st-1001<');
    expect(html).toContain("CPIT250");
    await client.logout();
  });

  it("shows the SIP status on rejection", async () => {
    const client = new Client(BASE_URL);
    let caught: ApiError | null = null;
    try {
      await client.login(STUDENT_1.impi, "ff".repeat(16));
    } catch (err) {
      caught = err as ApiError;
    }
    expect(caught).toBeInstanceOf(ApiError);
    expect(caught!.status).toBe(403);
    expect(caught!.sipStatus).toBe("403");
    const html = renderLoginForm({ name: caught!.errorName, sipStatus: caught!.sipStatus });
    expect(html).toContain("Login rejected (SIP 403)");
  });
});

describe("enrollment", () => {
  it("enroll then drop is reflected by the server after one refetch", async () => {
    const client = new Client(BASE_URL);
    const session = await client.login(STUDENT_1.impi, STUDENT_1.k);

    const before = await client.courses();
    const row0 = before.find((c) => c.code === "CPIT252")!;
    expect(row0.is_enrolled).toBe(false);

    await client.enroll("CPIT252");
    const after = await client.courses();
    const row1 = after.find((c) => c.code === "CPIT252")!;
    expect(row1.is_enrolled).toBe(true);
    expect(row1.enrolled).toBe(row0.enrolled + 1);
    expect(renderDashboard(session, after)).toContain('data-action="drop" data-code="CPIT252"');

    await client.drop("CPIT252");
    const final = await client.courses();
    const row2 = final.find((c) => c.code === "CPIT252")!;
    expect(row2.is_enrolled).toBe(false);
    expect(row2.enrolled).toBe(row0.enrolled);
    await client.logout();
  });

  it("maps 409 variants to distinct user messages", async () => {
    const client = new Client(BASE_URL);
    await client.login(STUDENT_3.impi, STUDENT_3.k);
    await client.enroll("MATH202");
    const again = await client.enroll("MATH202").catch((e) => e as ApiError);
    expect(again).toBeInstanceOf(ApiError);
    expect((again as ApiError).errorName).toBe("AlreadyEnrolled");
    const notIn = await client.drop("PHYS110").catch((e) => e as ApiError);
    expect((notIn as ApiError).errorName).toBe("NotEnrolled");
    expect(enrollErrorMessage("AlreadyEnrolled")).not.toBe(enrollErrorMessage("NotEnrolled"));
    expect(enrollErrorMessage("CourseFull")).toContain("full");
    await client.drop("MATH202");
    await client.logout();
  });
});

describe("events", () => {
  it("lists enrolled-course and global events grouped by day", async () => {
    const client = new Client(BASE_URL);
    await client.login(STUDENT_2.impi, STUDENT_2.k);
    await client.enroll("CPIT250");
    const events = await client.events(
      "2026-02-01T00:00:00+00:00",
      "2026-03-10T00:00:00+00:00",
    );
    const ids = events.map((e) => e.id);
    expect(ids).toContain("ev-career-day");
    expect(ids).toContain("ev-cpit250-mid");
    expect(ids).not.toContain("ev-math202-mid");

    const grouped = groupEventsByDay(events);
    let counted = 0;
    for (const [day, dayEvents] of grouped) {
      for (const ev of dayEvents) {
        expect(ev.start.slice(0, 10)).toBe(day);
        counted += 1;
      }
    }
    expect(counted).toBe(events.length);
    const html = renderEvents(events);
    for (const day of grouped.keys()) expect(html).toContain(`<h3>${day}</h3>`);
    await client.drop("CPIT250");
    await client.logout();
  });
});

describe("buildings", () => {
  it("displays the API distance to 0.1 m", async () => {
    const client = new Client(BASE_URL);
    await client.login(STUDENT_1.impi, STUDENT_1.k);
    const rows = await client.buildings("e", 21.4957, 39.2458);
    expect(rows.length).toBeGreaterThan(1);
    const distances = rows.map((r) => r.distance_m);
    expect(distances).toEqual([...distances].sort((a, b) => a - b));

    const html = renderBuildings(rows);
    for (const row of rows) {
      expect(html).toContain(formatDistance(row.distance_m));
      const shown = Number(formatDistance(row.distance_m).replace(" m", ""));
      expect(Math.abs(shown - row.distance_m)).toBeLessThanOrEqual(0.05);
    }
    await client.logout();
  });
});

describe("session gating", () => {
  it("rejects API calls without a token and after logout", async () => {
    const anonymous = new Client(BASE_URL);
    const denied = await anonymous.courses().catch((e) => e as ApiError);
    expect((denied as ApiError).status).toBe(401);

    const client = new Client(BASE_URL);
    await client.login(STUDENT_1.impi, STUDENT_1.k);
    const stale = client.token;
    await client.logout();
    const dead = new Client(BASE_URL, stale);
    const rejected = await dead.courses().catch((e) => e as ApiError);
    expect((rejected as ApiError).status).toBe(401);
  });
});
