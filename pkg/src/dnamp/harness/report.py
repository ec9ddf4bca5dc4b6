"""Check reports: items with status, witness and timing; text and JSON forms."""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

from .. import __version__

PASS, FAIL = "pass", "fail"


@dataclass
class CheckItem:
    desc: str
    status: str
    witness: str = ""
    millis: int = 0

    @property
    def ok(self) -> bool:
        return self.status == PASS


@dataclass
class CheckReport:
    suite: str
    items: list[CheckItem] = field(default_factory=list)
    version: str = __version__
    content_hashes: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(it.ok for it in self.items)

    @property
    def failures(self) -> list[CheckItem]:
        return [it for it in self.items if not it.ok]

    def add(self, desc: str, ok: bool, witness: str = "", millis: int = 0) -> CheckItem:
        if not ok and not witness:
            witness = "no witness recorded"
        item = CheckItem(desc, PASS if ok else FAIL, "" if ok else witness, millis)
        self.items.append(item)
        return item

    @contextmanager
    def timed(self, desc: str):
        """``with rep.timed(desc) as slot: slot['ok'] = ...; slot['witness'] = ...``"""
        slot = {"ok": False, "witness": ""}
        t0 = time.perf_counter()
        try:
            yield slot
        except Exception as exc:  # an item that raises is a failing item
            slot["ok"], slot["witness"] = False, f"{type(exc).__name__}: {exc}"
        self.add(desc, slot["ok"], slot["witness"], int((time.perf_counter() - t0) * 1000))

    def extend(self, other: CheckReport) -> None:
        self.items.extend(other.items)
        self.content_hashes.update(other.content_hashes)

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            for it in d["items"]:
                it["millis"] = 0
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> CheckReport:
        missing = {"suite", "items", "version", "content_hashes"} - set(d)
        if missing:
            raise ValueError(f"report is missing {sorted(missing)}")
        items = []
        for it in d["items"]:
            if it.get("status") not in (PASS, FAIL):
                raise ValueError(f"bad item status {it.get('status')!r}")
            items.append(CheckItem(str(it["desc"]), it["status"], str(it.get("witness", "")), int(it.get("millis", 0))))
        return cls(d["suite"], items, d["version"], dict(d["content_hashes"]))

    @classmethod
    def from_json(cls, text: str) -> CheckReport:
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [f"[{self.suite}]"]
        for it in self.items:
            lines.append(f"  {it.status.upper():4}  {it.desc}  ({it.millis} ms)")
            if it.witness:
                lines.append(f"        witness: {it.witness}")
        n_fail = len(self.failures)
        lines.append(f"  {len(self.items) - n_fail}/{len(self.items)} passed")
        return "\n".join(lines)


def merge(name: str, reports: list[CheckReport]) -> CheckReport:
    out = CheckReport(name)
    for r in reports:
        for it in r.items:
            out.items.append(CheckItem(f"{r.suite}: {it.desc}", it.status, it.witness, it.millis))
        out.content_hashes.update(r.content_hashes)
    return out
