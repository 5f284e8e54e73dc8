"""Web/business tier: assembles the platform (simulated network, core,
subscriber store, learning services, sync bridge) and exposes it as an
HTTP+JSON API with one embedded UE agent per login session.

A session token exists only after a successful 200-OK registration for
its identity, and dies with the registration: every authenticated call
re-checks that the binding is still present.  Error payloads are
machine-readable `{"error": <name>}` where <name> is the exact domain
error variant (CourseFull, ScheduleConflict, ...).
"""

from __future__ import annotations

import dataclasses
import secrets
from datetime import datetime, timedelta
from pathlib import Path

from fastapi import FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import learning, metrics
from .core import ImsCore
from .hss import DuplicateIdentity, HssStore, subscriber_from_dict
from .learning import (
    EnrollError,
    GeoPoint,
    LearningStore,
    UnknownCourse,
    UnknownStudent,
    authorize,
)
from .metrics import ReleaseRecord
from .netsim import LinkConfig, Network
from .odus import OdusBridge, RemoteOdus, Unreconciled
from .rng import SplitMix64
from .sip import SipUri
from .ue import UeAgent

REREGISTER_FRACTION = 0.8


class GatewayError(Exception):
    pass


class AuthRejected(GatewayError):
    def __init__(self, sip_status: int | str):
        super().__init__(f"registration rejected: {sip_status}")
        self.sip_status = sip_status


class UnknownToken(GatewayError):
    pass


@dataclasses.dataclass
class SessionToken:
    token: str
    impi: str
    student_id: str
    established_at: int  # simulated ms
    expires_s: int
    ue_node: str
    agent: UeAgent
    roles: frozenset[str]
    impu: SipUri


@dataclasses.dataclass
class PlatformConfig:
    sim_seed: int = 42
    link_delay_ms: int = 10
    link_loss: float = 0.0
    term_start: datetime = datetime.fromisoformat("2026-02-01T00:00:00+00:00")
    add_drop_deadline: datetime = datetime.fromisoformat("2026-03-01T00:00:00+00:00")
    domain: str = "ims.kau.example"


class Platform:
    """Everything behind the HTTP facade, wired over one simulated net."""

    def __init__(self, config: PlatformConfig | None = None):
        self.config = config or PlatformConfig()
        self.net = Network()
        self.hss = HssStore()
        self.core = ImsCore(
            self.hss,
            SplitMix64(self.config.sim_seed),
            domain=self.config.domain,
        )
        self.core.attach(self.net)
        self.learning = LearningStore(
            self.config.term_start, self.config.add_drop_deadline
        )
        self.bridge = OdusBridge(RemoteOdus(failure_prob=0.0, seed=self.config.sim_seed))
        self.releases: list[ReleaseRecord] = []
        self.sessions: dict[str, SessionToken] = {}
        self._login_count = 0

    # --- simulated wall clock ------------------------------------------------

    def now(self) -> datetime:
        return self.config.term_start + timedelta(milliseconds=self.net.now)

    # --- fixture loading -----------------------------------------------------

    def load_fixtures(self, data_dir: str | Path) -> dict[str, int]:
        data_dir = Path(data_dir)
        counts = {}
        self.hss = HssStore.load(data_dir / "subscribers.jsonl")
        self.core.hss = self.hss
        for sub in self.hss.subscribers():
            self.learning.add_student(sub.student_id)
        counts["subscribers"] = len(self.hss.subscribers())
        for obj in learning.load_jsonl(data_dir / "courses.jsonl"):
            self.learning.add_course(learning.course_from_dict(obj))
        counts["courses"] = len(self.learning.courses)
        for obj in learning.load_jsonl(data_dir / "buildings.jsonl"):
            self.learning.add_building(learning.building_from_dict(obj))
        counts["buildings"] = len(self.learning.buildings)
        for obj in learning.load_jsonl(data_dir / "events.jsonl"):
            self.learning.add_event(learning.event_from_dict(obj))
        counts["events"] = len(self.learning.events)
        self.releases = metrics.load_releases(data_dir / "releases.jsonl")
        counts["releases"] = len(self.releases)
        return counts

    # --- session lifecycle ------------------------------------------------------

    def login(self, impi: str, k_hex: str) -> SessionToken:
        try:
            k = bytes.fromhex(k_hex)
        except ValueError:
            raise AuthRejected("malformed key") from None
        if len(k) != 16:
            raise AuthRejected("malformed key")
        self._login_count += 1
        node = f"ue{self._login_count}"
        agent = UeAgent(
            self.net, node, impi,
            impu=self._impu_for(impi),
            k=k, domain=self.config.domain,
        )
        self.net.connect(node, self.core.pcscf, LinkConfig(
            delay_ms=self.config.link_delay_ms,
            loss_prob=self.config.link_loss,
            seed=self.config.sim_seed + self._login_count,
        ))
        result = agent.register()
        if result.status is None:
            raise AuthRejected("timeout")
        if result.status != 200:
            raise AuthRejected(result.status)
        token = SessionToken(
            token=secrets.token_hex(16),
            impi=impi,
            student_id=self._student_id_for(impi),
            established_at=self.net.now,
            expires_s=3600,
            ue_node=node,
            agent=agent,
            roles=self._roles_for(impi),
            impu=agent.impu,
        )
        self.sessions[token.token] = token
        return token

    def _impu_for(self, impi: str) -> SipUri:
        try:
            return self.hss.lookup_by_impi(impi).impus[0]
        except Exception:
            # unknown identities still run the SIP flow and draw a 403
            user, _, host = impi.partition("@")
            return SipUri(host=host or self.config.domain, user=user or None)

    def _student_id_for(self, impi: str) -> str:
        try:
            return self.hss.lookup_by_impi(impi).student_id
        except Exception:
            return ""

    def _roles_for(self, impi: str) -> frozenset[str]:
        try:
            return self.hss.lookup_by_impi(impi).roles
        except Exception:
            return frozenset()

    def logout(self, token: str) -> None:
        session = self.sessions.pop(token, None)
        if session is None:
            raise UnknownToken(token)
        session.agent.deregister()

    def resolve(self, token: str | None) -> SessionToken:
        """Token to live session; dead registration kills the token."""
        if token is None or token not in self.sessions:
            raise UnknownToken(token)
        session = self.sessions[token]
        self._maybe_refresh(session)
        if not self.hss.bindings(session.impu):
            del self.sessions[token]
            raise UnknownToken(token)
        return session

    def _maybe_refresh(self, session: SessionToken) -> None:
        age_ms = self.net.now - session.established_at
        if age_ms >= REREGISTER_FRACTION * session.expires_s * 1000:
            result = session.agent.register(expires=session.expires_s)
            if result.status == 200:
                session.established_at = self.net.now

    def record_enrollment_op(self, op: str, student_id: str, code: str) -> None:
        self.bridge.enqueue(op, student_id, code)
        try:
            self.bridge.reconcile()
        except Unreconciled:
            pass  # stays pending; retried on the next mutation


# --- HTTP layer ---------------------------------------------------------------


class LoginBody(BaseModel):
    impi: str
    k: str


class SubscriberBody(BaseModel):
    impi: str
    impus: list[str]
    k: str
    roles: list[str]
    student_id: str


def _error(status: int, name: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": name})


def _event_json(event: learning.Event) -> dict:
    return {
        "id": event.id,
        "kind": event.kind,
        "title": event.title,
        "start": event.start.isoformat(),
        "end": event.end.isoformat(),
        "course_code": event.course_code,
    }


def create_app(platform: Platform, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="mls-gateway")

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        # Auth gates before body validation on protected routes: a bad
        # body without a valid token is a 401, not a 422.
        is_open = request.url.path == "/session" and request.method == "POST"
        if not is_open:
            try:
                platform.resolve(request.headers.get("X-Session"))
            except UnknownToken:
                return _error(401, "InvalidSession")
        return _error(422, "MalformedBody")

    def require_session(x_session: str | None) -> SessionToken:
        try:
            return platform.resolve(x_session)
        except UnknownToken:
            raise _HttpStop(_error(401, "InvalidSession")) from None

    class _HttpStop(Exception):
        def __init__(self, response: JSONResponse):
            self.response = response

    @app.exception_handler(_HttpStop)
    async def stopped(request: Request, exc: _HttpStop):
        return exc.response

    @app.post("/session", status_code=201)
    def login(body: LoginBody):
        try:
            session = platform.login(body.impi, body.k)
        except AuthRejected as exc:
            return JSONResponse(
                status_code=403,
                content={"error": "AuthRejected", "sip_status": str(exc.sip_status)},
            )
        return {
            "token": session.token,
            "student_id": session.student_id,
            "impi": session.impi,
            "expires_s": session.expires_s,
            "roles": sorted(session.roles),
        }

    @app.delete("/session")
    def logout(x_session: str | None = Header(default=None)):
        session = require_session(x_session)
        platform.logout(session.token)
        return {"ok": True}

    @app.get("/courses")
    def list_courses(x_session: str | None = Header(default=None)):
        session = require_session(x_session)
        if not authorize(session.roles, "read_courses"):
            return _error(403, "Forbidden")
        out = []
        for course in platform.learning.courses.values():
            out.append({
                "code": course.code,
                "title": course.title,
                "capacity": course.capacity,
                "enrolled": platform.learning.enrolled_count(course.code),
                "is_enrolled": platform.learning.is_enrolled(
                    session.student_id, course.code),
                "schedule": [dataclasses.asdict(s) for s in course.schedule],
            })
        return sorted(out, key=lambda c: c["code"])

    @app.post("/courses/{code}/enrollment", status_code=201)
    def enroll(code: str, x_session: str | None = Header(default=None)):
        session = require_session(x_session)
        if not authorize(session.roles, "enroll_self"):
            return _error(403, "Forbidden")
        try:
            enrollment = platform.learning.enroll(
                session.student_id, code, platform.now())
        except UnknownCourse:
            return _error(404, "UnknownCourse")
        except EnrollError as exc:
            return _error(409, type(exc).__name__)
        platform.record_enrollment_op("add", session.student_id, code)
        return {
            "student_id": enrollment.student_id,
            "course_code": enrollment.course_code,
            "enrolled_at": enrollment.enrolled_at.isoformat(),
        }

    @app.delete("/courses/{code}/enrollment")
    def drop(code: str, x_session: str | None = Header(default=None)):
        session = require_session(x_session)
        if not authorize(session.roles, "drop_self"):
            return _error(403, "Forbidden")
        try:
            platform.learning.drop(session.student_id, code, platform.now())
        except EnrollError as exc:
            status = 404 if isinstance(exc, UnknownCourse) else 409
            return _error(status, type(exc).__name__)
        platform.record_enrollment_op("drop", session.student_id, code)
        return {"ok": True}

    @app.get("/courses/{code}/materials")
    def materials(code: str, x_session: str | None = Header(default=None)):
        session = require_session(x_session)
        if not authorize(session.roles, "read_courses"):
            return _error(403, "Forbidden")
        try:
            return {"materials": platform.learning.get_materials(code)}
        except UnknownCourse:
            return _error(404, "UnknownCourse")

    @app.get("/courses/{code}/assignments")
    def assignments(code: str, x_session: str | None = Header(default=None)):
        session = require_session(x_session)
        if not authorize(session.roles, "read_courses"):
            return _error(403, "Forbidden")
        try:
            rows = platform.learning.list_assignments(code, platform.now())
        except UnknownCourse:
            return _error(404, "UnknownCourse")
        return [
            {"id": a.id, "title": a.title, "due": a.due.isoformat(),
             "overdue": overdue}
            for a, overdue in rows
        ]

    @app.get("/events")
    def events(
        x_session: str | None = Header(default=None),
        window_from: str = Query(alias="from"),
        window_to: str = Query(alias="to"),
    ):
        session = require_session(x_session)
        if not authorize(session.roles, "read_events"):
            return _error(403, "Forbidden")
        try:
            t0 = datetime.fromisoformat(window_from)
            t1 = datetime.fromisoformat(window_to)
        except ValueError:
            return _error(422, "MalformedBody")
        if t0 > t1:
            return _error(422, "MalformedBody")
        try:
            found = platform.learning.upcoming_events(session.student_id, t0, t1)
        except UnknownStudent:
            return _error(404, "UnknownStudent")
        return [_event_json(e) for e in found]

    @app.get("/buildings")
    def buildings(
        q: str,
        lat: float,
        lon: float,
        x_session: str | None = Header(default=None),
    ):
        session = require_session(x_session)
        if not authorize(session.roles, "read_buildings"):
            return _error(403, "Forbidden")
        try:
            pos = GeoPoint(lat, lon)
        except ValueError:
            return _error(422, "MalformedBody")
        ranked = platform.learning.locate_building(q, pos)
        return [
            {"id": b.id, "number": b.number, "name": b.name,
             "lat": b.lat, "lon": b.lon, "distance_m": dist}
            for b, dist in ranked
        ]

    @app.get("/metrics/releases")
    def releases(x_session: str | None = Header(default=None)):
        require_session(x_session)
        return [metrics.record_to_dict(r) for r in platform.releases]

    @app.post("/admin/subscribers", status_code=201)
    def add_subscriber(
        body: SubscriberBody, x_session: str | None = Header(default=None)
    ):
        session = require_session(x_session)
        if not authorize(session.roles, "provision_subscriber"):
            return _error(403, "Forbidden")
        try:
            sub = subscriber_from_dict({
                "impi": body.impi, "impus": body.impus, "k": body.k,
                "roles": body.roles, "student_id": body.student_id,
            })
        except Exception:
            return _error(422, "MalformedBody")
        try:
            platform.hss.provision(sub)
        except DuplicateIdentity:
            return _error(409, "DuplicateIdentity")
        platform.learning.add_student(sub.student_id)
        return {"impi": sub.impi}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
