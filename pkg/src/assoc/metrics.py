from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from src.assoc.tracklet import Tracklet


def detection_identities(
    tracklets: Sequence[Tracklet], identities: Optional[Mapping[str, str]] = None
) -> Dict[int, Tuple[int, str]]:
    """Frame and identity of each consumed detection, keyed by detection index."""
    identities = identities or {}
    assigned: Dict[int, Tuple[int, str]] = {}
    for tracklet in tracklets:
        identity = identities.get(tracklet.id, tracklet.id)
        for index, frame in zip(tracklet.detection_indices, tracklet.detection_frames):
            assigned[index] = (frame, identity)
    return assigned


def count_identity_switches(
    truth: Mapping[int, str],
    tracklets: Sequence[Tracklet],
    identities: Optional[Mapping[str, str]] = None,
) -> int:
    """Times a true subject's consecutive consumed detections change identity.

    Detections are ordered by frame, then by index within a frame, so the
    rows of the detection file may come in any order. Detections nobody
    consumed are skipped.
    """
    sequences: Dict[str, List[Tuple[int, int, str]]] = {}
    for index, (frame, identity) in detection_identities(tracklets, identities).items():
        if index in truth:
            sequences.setdefault(truth[index], []).append((frame, index, identity))
    switches = 0
    for sequence in sequences.values():
        sequence.sort()
        switches += sum(1 for a, b in zip(sequence, sequence[1:]) if a[2] != b[2])
    return switches
