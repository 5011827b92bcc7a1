"""
Author: Imran Mughal
Email: imran@mughal.com
Date: October 18, 2026
"""

import json
import logging
import math
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

from sqlalchemy import create_engine, func, inspect, select
from sqlalchemy.orm import Session, sessionmaker

from models import Base, EpochMetric, Run

logger = logging.getLogger(__name__)

_engines: Dict[str, Any] = {}


def get_engine(url: str):
    """One engine per ledger URL; tables are created on first use."""
    engine = _engines.get(url)
    if engine is None:
        engine = create_engine(url, echo=False, future=True)
        Base.metadata.create_all(engine)
        _engines[url] = engine
    return engine


@contextmanager
def get_session(url: str) -> Iterator[Session]:
    session = sessionmaker(get_engine(url), expire_on_commit=False)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def _clean(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def record_run(url: str, command: str, config_hash: str = "", loss: Optional[str] = None,
               seed: Optional[int] = None, output_dir: Optional[str] = None,
               metrics: Optional[Dict[str, Any]] = None, history=None,
               details: Optional[Dict[str, Any]] = None) -> int:
    """Insert one run (plus its epoch rows) and return its id."""
    metrics = metrics or {}
    with get_session(url) as session:
        run = Run(
            command=command,
            config_hash=config_hash,
            loss=loss,
            seed=seed,
            output_dir=output_dir,
            accuracy=_clean(metrics.get("accuracy")),
            ece=_clean(metrics.get("ece")),
            aece=_clean(metrics.get("aece")),
            nll=_clean(metrics.get("nll")),
            temperature=_clean(metrics.get("temperature")),
            details=json.dumps(details, sort_keys=True) if details else None,
        )
        for record in (history.records if history is not None else []):
            run.epochs.append(EpochMetric(
                epoch=record.epoch,
                train_loss=_clean(record.train_loss),
                val_loss=_clean(record.val_loss),
                val_acc=_clean(record.val_acc),
                val_ece=_clean(record.val_ece),
                learning_rate=record.learning_rate,
            ))
        session.add(run)
        session.flush()
        run_id = run.run_id
    logger.debug("Recorded %s run %d in ledger %s", command, run_id, url)
    return run_id


def _run_to_dict(run: Run) -> Dict[str, Any]:
    """Convert a Run object to a dictionary."""
    return {
        "run_id": run.run_id,
        "command": run.command,
        "config_hash": run.config_hash,
        "loss": run.loss,
        "seed": run.seed,
        "output_dir": run.output_dir,
        "accuracy": run.accuracy,
        "ece": run.ece,
        "aece": run.aece,
        "nll": run.nll,
        "temperature": run.temperature,
        "epochs": len(run.epochs),
        "created_at": run.created_at.isoformat(),
    }


def list_runs(url: str, command: Optional[str] = None, limit: int = 50) -> Dict[str, List[Dict[str, Any]]]:
    with get_session(url) as session:
        query = select(Run).order_by(Run.run_id.desc()).limit(limit)
        if command:
            query = query.filter(Run.command == command)
        runs = session.execute(query).scalars().all()
        return {"runs": [_run_to_dict(run) for run in runs]}


def ledger_tables(url: str) -> Dict[str, List[Dict[str, Any]]]:
    """Describe each ledger table: row count, columns, primary key and foreign-key targets."""
    engine = get_engine(url)
    inspector = inspect(engine)
    tables = []
    with engine.connect() as connection:
        for table in Base.metadata.sorted_tables:
            primary = set(inspector.get_pk_constraint(table.name).get("constrained_columns") or [])
            references = {}
            for fk in inspector.get_foreign_keys(table.name):
                for local, remote in zip(fk["constrained_columns"], fk["referred_columns"]):
                    references[local] = f"{fk['referred_table']}.{remote}"
            rows = connection.execute(select(func.count()).select_from(table)).scalar_one()
            tables.append({
                "name": table.name,
                "rows": rows,
                "columns": [{
                    "name": column["name"],
                    "type": str(column["type"]),
                    "nullable": column.get("nullable", True),
                    "primary_key": column["name"] in primary,
                    "references": references.get(column["name"]),
                } for column in inspector.get_columns(table.name)],
            })
    return {"tables": tables}
