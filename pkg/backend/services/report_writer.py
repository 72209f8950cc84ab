import os
import json
import math
import logging
from datetime import datetime
from typing import Any, Dict, List, Optional

import numpy as np

from .verification_pipeline import RunResult

logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
TRACE_DIR = "traces"
FLOAT_FORMAT = "%.12e"
# the only field allowed to differ between two runs of one scenario
TIMESTAMP_FIELD = "generated_at"


def to_jsonable(value: Any) -> Any:
    """numpy scalars and arrays to plain Python; NaN and infinities to None"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_report(run: RunResult, generated_at: Optional[str] = None) -> str:
    document = to_jsonable(run.to_dict())
    document[TIMESTAMP_FIELD] = generated_at or datetime.now().isoformat()
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def write_traces(run: RunResult, output_dir: str) -> List[str]:
    """One CSV per trace, written by a single writer each"""
    trace_dir = os.path.join(output_dir, TRACE_DIR)
    os.makedirs(trace_dir, exist_ok=True)
    paths = []
    for record in run.records:
        if record.trace is None:
            continue
        path = os.path.join(trace_dir, f"{record.label}.csv")
        record.trace.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        paths.append(path)
    logger.info(f"Wrote {len(paths)} trace files to {trace_dir}")
    return paths


def write_run(run: RunResult, output_dir: str, traces: bool = True) -> Dict[str, Any]:
    """
    Write report.json and, optionally, traces/<label>.csv under output_dir

    Returns:
        Paths of the written report and trace files
    """
    try:
        os.makedirs(output_dir, exist_ok=True)
        report_path = os.path.join(output_dir, REPORT_NAME)
        with open(report_path, "w", encoding="utf-8") as f:
            f.write(render_report(run))
        trace_paths = write_traces(run, output_dir) if traces else []
        logger.info(f"Run report saved to {report_path}")
        return {"report": report_path, "traces": trace_paths}
    except Exception as e:
        logger.error(f"Error writing run artifacts: {e}")
        raise


def load_report(path: str, drop_timestamp: bool = True) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        document = json.load(f)
    if drop_timestamp:
        document.pop(TIMESTAMP_FIELD, None)
    return document
