"""Batch entry points for the full pipeline and headless operation.

    emoannot ingest   --store ROOT --manifest session.json
    emoannot detect   --store ROOT --session S [--params detector.conf]
    emoannot pack     --store ROOT --session S
    emoannot annotate --store ROOT --session S --provider mock [--mock-transcript t.json]
    emoannot act      --store ROOT --session S --packet P --action verify
    emoannot export   --store ROOT --session S [--states verified,edited] [--out path]
    emoannot render   --store ROOT --session S --stream ID --start-ms A --end-ms B --out DIR
    emoannot serve    --store ROOT [--host H --port N]

Exit codes: 0 success, 1 domain error, 2 usage error. Each command rewrites
only its own stage outputs, so re-running with identical inputs leaves the
store byte-stable.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields as dataclass_fields, replace
from pathlib import Path
from typing import Optional

from . import annotate as annotate_mod
from . import describe, events, export, ingest, packets, timeline
from .errors import (
    ConflictError,
    IllegalTransitionError,
    InvalidInputError,
    NotFoundError,
    ParseError,
    ProviderTransportError,
)
from .providers import make_provider
from .store import SessionMeta, SessionStore, SignalStream, StreamEntry, VideoTrackRef

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def read_kv_file(path: str | Path) -> dict[str, str]:
    """`key = value` lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        ln = raw.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise InvalidInputError(f"bad config line (need key = value): {ln!r}")
        key, _, value = ln.partition("=")
        out[key.strip()] = value.strip()
    return out


@dataclass
class CliConfig:
    store_root: Optional[str] = None
    scenes: Optional[list[str]] = None
    host: str = "127.0.0.1"
    port: int = 8765
    emotion_vocab: Optional[list[str]] = None

    @classmethod
    def from_file(cls, path: str | Path) -> "CliConfig":
        kv = read_kv_file(path)
        cfg = cls()
        if "store_root" in kv:
            cfg.store_root = kv["store_root"]
        if "scenes" in kv:
            cfg.scenes = [s.strip() for s in kv["scenes"].split(",") if s.strip()]
        if "host" in kv:
            cfg.host = kv["host"]
        if "port" in kv:
            cfg.port = int(kv["port"])
        if "emotion_vocab" in kv:
            cfg.emotion_vocab = [s.strip() for s in kv["emotion_vocab"].split(",") if s.strip()]
        return cfg


def load_detector_params(path: Optional[str]) -> events.DetectorParams:
    """Defaults overridden by dotted keys (e.g. `physio.z_threshold = 2.0`)."""
    params = events.DetectorParams()
    if path is None:
        params.validate()
        return params
    kv = read_kv_file(path)
    groups = {"au": params.au, "motion": params.motion, "physio": params.physio}
    merge_gap = params.merge_gap_ms
    for key, value in kv.items():
        if key == "merge_gap_ms":
            merge_gap = int(value)
            continue
        group, _, name = key.partition(".")
        if group not in groups or not name:
            raise InvalidInputError(f"unknown detector parameter {key!r}")
        target = groups[group]
        field_types = {f.name: f.type for f in dataclass_fields(target)}
        if name not in field_types:
            raise InvalidInputError(f"unknown detector parameter {key!r}")
        current = getattr(target, name)
        converted = int(value) if isinstance(current, int) else float(value)
        groups[group] = replace(target, **{name: converted})
    params = events.DetectorParams(
        au=groups["au"], motion=groups["motion"], physio=groups["physio"], merge_gap_ms=merge_gap
    )
    params.validate()
    return params


def _open_store(args: argparse.Namespace, config: CliConfig) -> SessionStore:
    root = args.store or config.store_root
    if not root:
        raise _Usage("no store root: pass --store or set store_root in --config")
    return SessionStore(root, scenes=config.scenes)


class _Usage(Exception):
    pass


# -- ingest --------------------------------------------------------------

_PARSERS = {
    "au": lambda path, epoch, sid: ingest.parse_au_csv(path, epoch, stream_id=sid),
    "bvp": lambda path, epoch, sid: ingest.parse_physio_csv(path, "bvp", epoch, stream_id=sid),
    "hr": lambda path, epoch, sid: ingest.parse_physio_csv(path, "hr", epoch, stream_id=sid),
    "eda": lambda path, epoch, sid: ingest.parse_physio_csv(path, "eda", epoch, stream_id=sid),
    "skeleton": lambda path, epoch, sid: ingest.parse_skeleton(path, epoch, stream_id=sid),
    "imu": lambda path, epoch, sid: ingest.parse_imu(path, epoch, stream_id=sid),
}


def cmd_ingest(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    manifest_path = Path(args.manifest)
    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = manifest_path.parent
    epoch = int(doc["recording_epoch_ms"])

    meta = SessionMeta(
        session_id=doc["session_id"],
        participant_id=doc["participant_id"],
        scene_id=doc["scene_id"],
        recording_epoch_ms=epoch,
        stream_manifest=[
            StreamEntry(s["stream_id"], s["kind"], float(s["rate_hz"]), s["path"])
            for s in doc.get("streams", [])
        ],
        video_manifest=[
            VideoTrackRef(
                v["video_id"], v["uri"], float(v["fps"]), int(v["frame_count"]),
                int(v.get("offset_ms", 0)), v["kind"], v.get("source_stream_id"),
            )
            for v in doc.get("videos", [])
        ],
    )
    meta.validate(store.scenes)

    # parse everything before writing anything: a bad file must not leave a partial session
    parsed: list[tuple[SignalStream, ingest.ParseReport]] = []
    for entry in meta.stream_manifest:
        src = base / entry.source_path
        if not src.exists():
            raise ParseError(f"{entry.stream_id}: source file {src} not found")
        stream, report = _PARSERS[entry.modality_kind](src, epoch, entry.stream_id)
        stream.rate_hz = entry.declared_rate_hz  # manifest metadata wins for the index grid
        parsed.append((stream, report))

    index = timeline.build_alignment_index(meta, [s for s, _ in parsed])
    store.put_session(meta)
    for stream, report in parsed:
        store.put_stream(meta.session_id, stream, report=report.to_dict())
        print(
            f"[ingest] {stream.stream_id}: {report.rows_read} rows,"
            f" {report.rows_dropped} dropped, {len(report.gaps)} gaps"
        )
    timeline.save_index(store, index)
    print(f"[ingest] session {meta.session_id}: axis [{index.t0_ms}, {index.t1_ms}] ms")
    return 0


# -- detect --------------------------------------------------------------

def detect_session_events(
    store: SessionStore, session_id: str, params: events.DetectorParams
) -> tuple[list[events.CandidateEvent], list[events.EventGroup]]:
    meta = store.get_session(session_id)
    candidates: list[events.CandidateEvent] = []
    for entry in sorted(meta.stream_manifest, key=lambda e: e.stream_id):
        stream = store.get_stream(session_id, entry.stream_id)
        if stream.modality_kind == "au":
            candidates.extend(events.detect_au_peaks(stream, params))
        elif stream.modality_kind == "skeleton":
            energy = events.motion_energy(stream, params.motion.frame_window_ms)
            candidates.extend(
                events.detect_motion_events(energy, params, source_stream_id=stream.stream_id)
            )
        else:
            for channel in stream.channel_names:
                candidates.extend(events.detect_physio_events(stream, params, channel=channel))
    candidates.sort(key=lambda e: (e.window[0], e.window[1], e.peak_ms, e.event_id))
    groups = events.aggregate_events(candidates, params.merge_gap_ms)
    return candidates, groups


def cmd_detect(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    params = load_detector_params(args.params)
    candidates, groups = detect_session_events(store, args.session, params)
    events.save_events(store, args.session, candidates, groups, params)
    print(f"[detect] {len(candidates)} candidates in {len(groups)} groups (params {params.digest()})")
    return 0


# -- pack ----------------------------------------------------------------

def cmd_pack(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    index = timeline.load_index(store, args.session)
    _, groups, _ = events.load_events(store, args.session)
    built = [packets.build_packet(g, index) for g in sorted(groups, key=lambda g: g.span[0])]
    packets.save_packets(store, args.session, built)
    print(f"[pack] {len(built)} packets")
    return 0


# -- annotate ------------------------------------------------------------

def _physio_priority(kind: str) -> int:
    return {"eda": 0, "bvp": 1, "hr": 2, "imu": 3}.get(kind, 9)


def build_descriptors(
    store: SessionStore,
    session_id: str,
    packet: packets.EventPacket,
    index: timeline.AlignmentIndex,
    params: events.DetectorParams,
) -> dict[str, describe.ModalityDescriptor]:
    """Deterministic describer set for one packet; missing modalities are skipped."""
    meta = store.get_session(session_id)
    by_kind: dict[str, list[str]] = {}
    for entry in meta.stream_manifest:
        by_kind.setdefault(entry.modality_kind, []).append(entry.stream_id)
    for ids in by_kind.values():
        ids.sort()
    descriptors: dict[str, describe.ModalityDescriptor] = {}
    if "au" in by_kind:
        try:
            descriptors[describe.FACE] = describe.describe_face(
                packet, store.get_stream(session_id, by_kind["au"][0])
            )
        except InvalidInputError:
            pass
    if "skeleton" in by_kind:
        try:
            descriptors[describe.MOTION] = describe.describe_motion(
                packet, store.get_stream(session_id, by_kind["skeleton"][0])
            )
        except InvalidInputError:
            pass
    physio_ids = [
        (kind, sid) for kind, ids in by_kind.items() if kind in ("eda", "bvp", "hr", "imu")
        for sid in ids
    ]
    if physio_ids:
        kind, sid = min(physio_ids, key=lambda ks: (_physio_priority(ks[0]), ks[1]))
        try:
            descriptors[describe.PHYSIO] = describe.describe_physio(
                packet, store.get_stream(session_id, sid),
                smooth_ms=params.physio.smooth_for(kind),
            )
        except InvalidInputError:
            pass
    ctx = describe.describe_context(packet, index)
    if ctx is not None:
        descriptors[describe.CONTEXT] = ctx
    return descriptors


def cmd_annotate(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    if not args.provider:
        raise _Usage("annotate needs --provider (mock, scripted or real)")
    transcript = None
    if args.mock_transcript:
        transcript = json.loads(Path(args.mock_transcript).read_text(encoding="utf-8"))
        if not isinstance(transcript, list):
            raise _Usage("--mock-transcript must be a JSON array of responses")
    provider = make_provider(args.provider, transcript)
    params = load_detector_params(args.params)
    index = timeline.load_index(store, args.session)
    templates = annotate_mod.default_templates()
    packet_list = packets.load_packets(store, args.session)

    records: list[annotate_mod.AnnotationRecord] = []
    updated: list[packets.EventPacket] = []
    for packet in packet_list:
        if packet.state == packets.DISCARDED:
            updated.append(packet)
            continue
        descriptors = build_descriptors(store, args.session, packet, index, params)
        record = annotate_mod.annotate_event(packet, descriptors, templates, provider)
        if record.populated_unimodal():
            record = annotate_mod.aggregate_multimodal(
                record, packet, templates["multimodal"], provider,
                emotion_vocab=config.emotion_vocab,
            )
        records.append(record)
        updated.append(
            packets.attach_annotation(packet, record.annotation_id, record.emotion_descriptor)
        )
    annotate_mod.save_annotations(store, args.session, records)
    packets.save_packets(store, args.session, updated)
    failed = sum(len(r.failed_fields) for r in records)
    print(f"[annotate] {len(records)} records via {provider.model_id}, {failed} failed fields")
    return 0


# -- act -----------------------------------------------------------------

def cmd_act(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    if bool(args.packet) == bool(args.annotation):
        raise _Usage("act needs exactly one of --packet / --annotation")
    if args.packet:
        index = timeline.load_index(store, args.session)
        packet_list = packets.load_packets(store, args.session)
        hits = [i for i, p in enumerate(packet_list) if p.packet_id == args.packet]
        if not hits:
            raise NotFoundError(f"unknown packet {args.packet}")
        new_boundary = None
        if args.action == "edit":
            if args.start_ms is None or args.end_ms is None:
                raise _Usage("edit needs --start-ms and --end-ms")
            new_boundary = (args.start_ms, args.end_ms)
        packet_list[hits[0]] = packets.apply_action(
            packet_list[hits[0]], index, args.action,
            new_boundary=new_boundary, note=args.note, at_ms=args.at_ms,
        )
        packets.save_packets(store, args.session, packet_list)
        print(f"[act] packet {args.packet}: {args.action} -> {packet_list[hits[0]].state}")
    else:
        records = annotate_mod.load_annotations(store, args.session)
        hits = [i for i, r in enumerate(records) if r.annotation_id == args.annotation]
        if not hits:
            raise NotFoundError(f"unknown annotation {args.annotation}")
        record = records[hits[0]]
        if args.action == "edit":
            if not args.edit_field or args.new_text is None:
                raise _Usage("annotation edit needs --field and --new-text")
            at = args.at_ms if args.at_ms is not None else packets.now_ms()
            record = annotate_mod.apply_annotation_edit(record, args.edit_field, args.new_text, at)
        else:
            record = annotate_mod.annotation_action(record, args.action)
        records[hits[0]] = record
        annotate_mod.save_annotations(store, args.session, records)
        print(f"[act] annotation {args.annotation}: {args.action} -> {record.status}")
    return 0


# -- export / render / serve ----------------------------------------------

def cmd_export(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    states = tuple(s.strip() for s in args.states.split(",") if s.strip())
    payload = export.export_session(store, args.session, states, states)
    if args.out:
        Path(args.out).write_bytes(payload)
        where = args.out
    else:
        where = str(store.write_export(args.session, payload))
    manifest, records = export.read_export(payload)
    print(f"[export] {manifest['record_count']} records -> {where}")
    return 0


def cmd_render(args: argparse.Namespace, config: CliConfig) -> int:
    store = _open_store(args, config)
    stream = store.get_stream(args.session, args.stream)
    view = timeline.RenderView(
        start_ms=args.start_ms, end_ms=args.end_ms,
        width_px=args.width, height_px=args.height,
        fps=args.fps, window_ms=args.window_ms, channel=args.channel,
    )
    frames = timeline.render_signal_frames(stream, view)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(frames):
        (out / f"frame_{k:05d}.ppm").write_bytes(frame)
    print(f"[render] {len(frames)} frames -> {out}")
    return 0


def cmd_serve(args: argparse.Namespace, config: CliConfig) -> int:
    import uvicorn

    from .api import create_app

    store = _open_store(args, config)
    app = create_app(store, emotion_vocab=config.emotion_vocab)
    host = args.host or config.host
    port = args.port or config.port
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


# -- wiring ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emoannot", description=__doc__.splitlines()[0])
    parser.add_argument("--store", help="store root directory")
    parser.add_argument("--config", help="key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a session manifest into the store")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("detect", help="mine candidate events for a session")
    p.add_argument("--session", required=True)
    p.add_argument("--params", help="detector params override file")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("pack", help="package event groups into packets")
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("annotate", help="draft annotations through a provider")
    p.add_argument("--session", required=True)
    p.add_argument("--provider", choices=["mock", "scripted", "real"])
    p.add_argument("--mock-transcript", help="JSON array of scripted responses")
    p.add_argument("--params", help="detector params override file (describer smoothing)")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("act", help="apply a verification action")
    p.add_argument("--session", required=True)
    p.add_argument("--packet")
    p.add_argument("--annotation")
    p.add_argument("--action", required=True, choices=["verify", "edit", "discard", "restore"])
    p.add_argument("--start-ms", type=int)
    p.add_argument("--end-ms", type=int)
    p.add_argument("--note", default="")
    p.add_argument("--at-ms", type=int, help="fixed action timestamp (for reproducible runs)")
    p.add_argument("--field", dest="edit_field", help="annotation field to edit")
    p.add_argument("--new-text", help="replacement text for annotation edits")
    p.set_defaults(func=cmd_act)

    p = sub.add_parser("export", help="emit training-ready JSONL records")
    p.add_argument("--session", required=True)
    p.add_argument("--states", default="verified,edited", help="eligible states, comma separated")
    p.add_argument("--out", help="output path (default: export.jsonl in the session dir)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("render", help="rasterize a stream into PPM track frames")
    p.add_argument("--session", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--start-ms", type=int, required=True)
    p.add_argument("--end-ms", type=int, required=True)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--fps", type=float, default=10.0)
    p.add_argument("--window-ms", type=int, default=2000)
    p.add_argument("--channel")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="run the HTTP API service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = CliConfig.from_file(args.config) if args.config else CliConfig()
        return args.func(args, config)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (
        NotFoundError,
        ConflictError,
        InvalidInputError,
        IllegalTransitionError,
        ProviderTransportError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
