# [file name]: utils/stream_processor.py
"""
Record Stream Processing - consumes the ordered measurement stream of a
static campaign, tracks the lock state and collects output tables.
"""

from typing import Dict, Generator, Iterator, List

import numpy as np

from atomsense.errors import FringeLost
from atomsense.sequencer import MeasurementRecord


CAMPAIGN_HEADER = (
    "t_s", "a_mps2", "omega_rads", "alpha_pk_pv", "alpha_pk_mv", "alpha_mk_pv", "alpha_mk_mv",
    "a_conv_correction", "a_uncorrected_mps2", "omega_uncorrected_rads",
)


class CampaignStreamProcessor:
    """
    Consumes MeasurementRecords in time order and yields events:
    {"type": "record" | "progress" | "fringe_lost" | "done", ...}
    """

    def __init__(self, n_blocks: int, progress_every: int = 100):
        self.n_blocks = n_blocks
        self.progress_every = max(progress_every, 1)

        # State tracking
        self.current_state = "idle"  # idle, running, done, failed
        self.records: List[MeasurementRecord] = []
        self.last_t = None

    def process(self, stream: Iterator[MeasurementRecord]) -> Generator[Dict, None, None]:
        self.current_state = "running"
        try:
            for record in stream:
                if self.last_t is not None and record.t <= self.last_t:
                    raise ValueError(f"record stream out of order at t={record.t}")
                self.last_t = record.t
                self.records.append(record)
                yield {"type": "record", "record": record}

                count = len(self.records)
                if count % self.progress_every == 0:
                    yield {"type": "progress", "blocks": count, "total": self.n_blocks, "t": record.t}
        except FringeLost as e:
            self.current_state = "failed"
            yield {"type": "fringe_lost", "message": str(e), "blocks": len(self.records)}
            raise
        self.current_state = "done"
        yield {"type": "done", "blocks": len(self.records)}

    def campaign_rows(self) -> List[tuple]:
        return [
            (r.t, r.a, r.omega, r.alpha_pk_pv, r.alpha_pk_mv, r.alpha_mk_pv, r.alpha_mk_mv,
             r.a_conv_correction, r.a_uncorrected, r.omega_uncorrected)
            for r in self.records
        ]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)
