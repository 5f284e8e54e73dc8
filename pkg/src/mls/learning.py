"""Learning-domain services: course add/drop, materials and assignments,
event lookup, campus building search, and the role matrix.

Error precedence for add_course is fixed so outcomes are deterministic:
UnknownCourse, then DeadlinePassed, then AlreadyEnrolled, CourseFull,
ScheduleConflict.  Slot overlap is half-open (same day AND
start < other.end AND other.start < end), so back-to-back classes are
legal.  Mutating operations are atomic: all checks pass or nothing
changes.
"""

from __future__ import annotations

import dataclasses
import json
import math
from datetime import datetime, timedelta
from pathlib import Path

EARTH_RADIUS_M = 6_371_000.0

ACTIONS = (
    "enroll_self",
    "drop_self",
    "read_courses",
    "read_events",
    "read_buildings",
    "post_material",
    "post_event",
    "provision_subscriber",
)

# role -> actions allowed; a user is allowed an action when any of their
# roles allows it.
ROLE_MATRIX: dict[str, frozenset[str]] = {
    "student": frozenset({
        "enroll_self", "drop_self",
        "read_courses", "read_events", "read_buildings",
    }),
    "faculty": frozenset({
        "read_courses", "read_events", "read_buildings",
        "post_material", "post_event",
    }),
    "admin": frozenset(ACTIONS),
}

EVENT_KINDS = ("exam", "lecture", "homework", "enrollment", "social")
GLOBAL_EVENT_KINDS = frozenset({"enrollment", "social"})


class LearningError(Exception):
    pass


class EnrollError(LearningError):
    pass


class UnknownCourse(EnrollError):
    pass


class DeadlinePassed(EnrollError):
    pass


class AlreadyEnrolled(EnrollError):
    pass


class CourseFull(EnrollError):
    pass


class ScheduleConflict(EnrollError):
    pass


class NotEnrolled(EnrollError):
    pass


class UnknownStudent(LearningError):
    pass


class UnknownBuilding(LearningError):
    pass


@dataclasses.dataclass(frozen=True)
class Slot:
    day: int  # 0 = Monday .. 6 = Sunday
    start_min: int  # minute of day
    end_min: int
    building_id: str
    room: str

    def __post_init__(self):
        if not 0 <= self.day <= 6:
            raise ValueError("day must be 0..6")
        if not 0 <= self.start_min < self.end_min <= 24 * 60:
            raise ValueError("slot needs start < end within one day")

    def overlaps(self, other: "Slot") -> bool:
        return (self.day == other.day
                and self.start_min < other.end_min
                and other.start_min < self.end_min)


@dataclasses.dataclass(frozen=True)
class Assignment:
    id: str
    title: str
    due: datetime


@dataclasses.dataclass(frozen=True)
class Course:
    code: str
    title: str
    capacity: int
    schedule: tuple[Slot, ...] = ()
    materials: tuple[str, ...] = ()
    assignments: tuple[Assignment, ...] = ()

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")


@dataclasses.dataclass(frozen=True)
class Enrollment:
    student_id: str
    course_code: str
    enrolled_at: datetime


@dataclasses.dataclass(frozen=True)
class Building:
    id: str
    number: str
    name: str
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError("coordinates out of range")


@dataclasses.dataclass(frozen=True)
class Event:
    id: str
    kind: str
    title: str
    start: datetime
    end: datetime
    course_code: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.start > self.end:
            raise ValueError("event start after end")
        if self.kind in ("exam", "lecture", "homework") and not self.course_code:
            raise ValueError(f"{self.kind} event must reference a course")


@dataclasses.dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError("coordinates out of range")


def haversine(p: GeoPoint, q: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6371 km."""
    phi1, phi2 = math.radians(p.lat), math.radians(q.lat)
    dphi = phi2 - phi1
    dlam = math.radians(q.lon - p.lon)
    a = (math.sin(dphi / 2.0) ** 2
         + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def authorize(user_roles: frozenset[str] | set[str], action: str) -> bool:
    if action not in ACTIONS:
        return False
    return any(action in ROLE_MATRIX.get(role, frozenset()) for role in user_roles)


class LearningStore:
    def __init__(self, term_start: datetime, add_drop_deadline: datetime):
        if add_drop_deadline < term_start:
            raise ValueError("deadline before term start")
        self.term_start = term_start
        self.add_drop_deadline = add_drop_deadline
        self.courses: dict[str, Course] = {}
        self.buildings: dict[str, Building] = {}
        self.events: dict[str, Event] = {}
        self._students: set[str] = set()
        self._enrollments: dict[tuple[str, str], Enrollment] = {}

    # --- setup ----------------------------------------------------------

    def add_student(self, student_id: str) -> None:
        self._students.add(student_id)

    def add_course(self, course: Course) -> None:
        self.courses[course.code] = course

    def add_building(self, building: Building) -> None:
        self.buildings[building.id] = building

    def add_event(self, event: Event) -> None:
        self.events[event.id] = event

    # --- edit course -------------------------------------------------------

    def enrollments_of(self, student_id: str) -> list[Enrollment]:
        return [e for (s, _), e in self._enrollments.items() if s == student_id]

    def enrolled_count(self, code: str) -> int:
        return sum(1 for (_, c) in self._enrollments if c == code)

    def is_enrolled(self, student_id: str, code: str) -> bool:
        return (student_id, code) in self._enrollments

    def enroll(self, student_id: str, code: str, now: datetime) -> Enrollment:
        course = self.courses.get(code)
        if course is None:
            raise UnknownCourse(code)
        if now > self.add_drop_deadline:
            raise DeadlinePassed(code)
        if (student_id, code) in self._enrollments:
            raise AlreadyEnrolled(code)
        if self.enrolled_count(code) >= course.capacity:
            raise CourseFull(code)
        for existing in self.enrollments_of(student_id):
            other = self.courses[existing.course_code]
            for slot in course.schedule:
                for other_slot in other.schedule:
                    if slot.overlaps(other_slot):
                        raise ScheduleConflict(
                            f"{code} conflicts with {other.code}")
        enrollment = Enrollment(student_id, code, now)
        self._enrollments[(student_id, code)] = enrollment
        self._students.add(student_id)
        return enrollment

    def drop(self, student_id: str, code: str, now: datetime) -> None:
        if (student_id, code) not in self._enrollments:
            raise NotEnrolled(code)
        if now > self.add_drop_deadline:
            raise DeadlinePassed(code)
        del self._enrollments[(student_id, code)]

    # --- check course ------------------------------------------------------

    def get_materials(self, code: str) -> list[str]:
        course = self.courses.get(code)
        if course is None:
            raise UnknownCourse(code)
        return list(course.materials)

    def list_assignments(self, code: str, now: datetime) -> list[tuple[Assignment, bool]]:
        """Assignments with overdue flag; overdue means due strictly
        before now."""
        course = self.courses.get(code)
        if course is None:
            raise UnknownCourse(code)
        return [(a, a.due < now) for a in course.assignments]

    # --- check event -------------------------------------------------------

    def upcoming_events(
        self, student_id: str, window_from: datetime, window_to: datetime
    ) -> list[Event]:
        """Global events, course events of enrolled courses, and weekly
        lecture occurrences, with start inside [from, to], sorted by
        (start, id)."""
        if window_from > window_to:
            raise ValueError("window from after to")
        if student_id not in self._students:
            raise UnknownStudent(student_id)
        enrolled = {e.course_code for e in self.enrollments_of(student_id)}
        out: dict[str, Event] = {}
        for event in self.events.values():
            relevant = (event.kind in GLOBAL_EVENT_KINDS
                        or event.course_code in enrolled)
            if relevant and window_from <= event.start <= window_to:
                out[event.id] = event
        for code in enrolled:
            for event in self._lecture_occurrences(code, window_from, window_to):
                out[event.id] = event
        return sorted(out.values(), key=lambda e: (e.start, e.id))

    def _lecture_occurrences(
        self, code: str, window_from: datetime, window_to: datetime
    ) -> list[Event]:
        course = self.courses[code]
        occurrences = []
        for index, slot in enumerate(course.schedule):
            # first occurrence of this weekday on/after term start
            first_day = self.term_start.date()
            shift = (slot.day - first_day.weekday()) % 7
            day = first_day + timedelta(days=shift)
            while True:
                start = datetime.combine(
                    day, datetime.min.time(), tzinfo=self.term_start.tzinfo
                ) + timedelta(minutes=slot.start_min)
                if start > window_to:
                    break
                if start >= window_from:
                    end = start + timedelta(minutes=slot.end_min - slot.start_min)
                    occurrences.append(Event(
                        id=f"{code}:{index}:{day.isoformat()}",
                        kind="lecture",
                        title=f"{course.title} lecture",
                        start=start,
                        end=end,
                        course_code=code,
                    ))
                day += timedelta(days=7)
        return occurrences

    # --- search building -----------------------------------------------------

    def locate_building(
        self, query: str, student_pos: GeoPoint
    ) -> list[tuple[Building, float]]:
        """Buildings whose number or name contains the query
        (case-insensitive), nearest first, ties by id."""
        needle = query.lower()
        hits = [
            b for b in self.buildings.values()
            if needle in b.number.lower() or needle in b.name.lower()
        ]
        ranked = [
            (b, haversine(student_pos, GeoPoint(b.lat, b.lon))) for b in hits
        ]
        ranked.sort(key=lambda pair: (pair[1], pair[0].id))
        return ranked

    # --- invariant check (used by tests) ---------------------------------------

    def check_invariants(self) -> None:
        for code, course in self.courses.items():
            assert self.enrolled_count(code) <= course.capacity, code
        by_student: dict[str, list[str]] = {}
        for (student, code) in self._enrollments:
            by_student.setdefault(student, []).append(code)
        for student, codes in by_student.items():
            slots = [
                (code, slot)
                for code in codes
                for slot in self.courses[code].schedule
            ]
            for i, (code_a, a) in enumerate(slots):
                for code_b, b in slots[i + 1:]:
                    if code_a != code_b:
                        assert not a.overlaps(b), (student, code_a, code_b)


# --- fixture loading -------------------------------------------------------


def _parse_instant(text: str) -> datetime:
    return datetime.fromisoformat(text)


def course_from_dict(obj: dict) -> Course:
    return Course(
        code=obj["code"],
        title=obj["title"],
        capacity=obj["capacity"],
        schedule=tuple(
            Slot(s["day"], s["start_min"], s["end_min"],
                 s["building_id"], s["room"])
            for s in obj.get("schedule", ())
        ),
        materials=tuple(obj.get("materials", ())),
        assignments=tuple(
            Assignment(a["id"], a["title"], _parse_instant(a["due"]))
            for a in obj.get("assignments", ())
        ),
    )


def building_from_dict(obj: dict) -> Building:
    return Building(obj["id"], obj["number"], obj["name"],
                    obj["lat"], obj["lon"])


def event_from_dict(obj: dict) -> Event:
    return Event(
        id=obj["id"], kind=obj["kind"], title=obj["title"],
        start=_parse_instant(obj["start"]), end=_parse_instant(obj["end"]),
        course_code=obj.get("course_code"),
    )


def load_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
