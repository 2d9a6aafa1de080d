"""emoannot: event-centered workbench for multimodal emotion data annotation.

Pipeline: ingest heterogeneous session recordings onto one time axis, mine
candidate events per modality, package them with traceable pointers, draft
structured annotations through an LLM provider, record analyst verification,
and export training-ready records.
"""

__version__ = "0.1.0"

from .store import SessionMeta, SessionStore, SignalStream, StreamEntry, VideoTrackRef  # noqa: F401
from .events import CandidateEvent, DetectorParams, EventGroup  # noqa: F401
from .timeline import AlignmentIndex, WindowRef  # noqa: F401
from .packets import EventPacket  # noqa: F401
from .annotate import AnnotationRecord  # noqa: F401
