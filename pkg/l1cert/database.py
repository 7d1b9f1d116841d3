"""
Database utilities for persistent sweep results
"""
import logging
import math
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine, func
from sqlalchemy.orm import declarative_base, sessionmaker

from .sweep import SweepRecord

Base = declarative_base()


class SweepRun(Base):
    """Table to track one sweep over one instance"""
    __tablename__ = 'sweep_runs'

    id = Column(Integer, primary_key=True)
    instance_name = Column(String(255), nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    models = Column(String(255), nullable=False)  # comma separated row models
    status = Column(String(50), nullable=False)  # 'completed', 'violations'
    n_records = Column(Integer, default=0)
    n_violations = Column(Integer, default=0)
    started_at = Column(DateTime, default=datetime.utcnow)
    completed_at = Column(DateTime, nullable=True)


class SweepRecordRow(Base):
    """Table to store the rows of a sweep"""
    __tablename__ = 'sweep_records'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('sweep_runs.id'), nullable=False, index=True)
    seed = Column(Integer, nullable=False)
    model = Column(String(50), nullable=False)
    delta = Column(Float, nullable=False)
    lam = Column(Float, nullable=True)
    lhs = Column(Float, nullable=True)  # NULL when the solver failed
    bound = Column(Float, nullable=True)
    satisfied = Column(Boolean, nullable=False)
    iters = Column(Integer, default=0)
    error = Column(Text, nullable=True)


def _to_db(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _from_db(value: Optional[float]) -> float:
    return float("nan") if value is None else float(value)


class DatabaseManager:
    """Manager for database operations"""

    def __init__(self, database_url: Optional[str] = None):
        self.database_url = database_url or os.getenv('L1CERT_DATABASE_URL')
        if not self.database_url:
            raise ValueError("L1CERT_DATABASE_URL environment variable is required")

        self.engine = create_engine(self.database_url)
        self.SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=self.engine)
        self.logger = logging.getLogger(__name__)

    def create_tables(self):
        """Create all tables"""
        Base.metadata.create_all(bind=self.engine)
        self.logger.info("Database tables created successfully")

    def get_session(self):
        """Get database session"""
        return self.SessionLocal()

    def save_sweep(self, instance_name: str, seed: int, records: Sequence[SweepRecord],
                   started_at: Optional[datetime] = None) -> int:
        """Store a sweep and all its rows in one transaction; returns the run id"""
        session = self.get_session()
        try:
            models = sorted({r.model for r in records})
            n_violations = sum(1 for r in records if not r.satisfied)
            run = SweepRun(
                instance_name=instance_name,
                seed=seed,
                models=",".join(models),
                status='violations' if n_violations else 'completed',
                n_records=len(records),
                n_violations=n_violations,
                started_at=started_at or datetime.utcnow(),
                completed_at=datetime.utcnow(),
            )
            session.add(run)
            session.flush()

            session.add_all([
                SweepRecordRow(
                    run_id=run.id,
                    seed=r.seed,
                    model=r.model,
                    delta=r.delta,
                    lam=_to_db(r.lam),
                    lhs=_to_db(r.lhs),
                    bound=_to_db(r.bound),
                    satisfied=bool(r.satisfied),
                    iters=int(r.iters),
                    error=r.error,
                )
                for r in records
            ])
            session.commit()
            self.logger.info(f"Saved sweep run {run.id} for {instance_name}: "
                             f"{len(records)} rows, {n_violations} violations")
            return run.id
        except Exception as e:
            session.rollback()
            self.logger.error(f"Error saving sweep for {instance_name}: {str(e)}")
            raise
        finally:
            session.close()

    def load_sweep(self, run_id: int) -> List[SweepRecord]:
        """Rows of a stored sweep, in insertion order"""
        session = self.get_session()
        try:
            rows = session.query(SweepRecordRow).filter(
                SweepRecordRow.run_id == run_id
            ).order_by(SweepRecordRow.id).all()
            return [
                SweepRecord(
                    seed=row.seed,
                    model=row.model,
                    delta=row.delta,
                    lam=row.lam,
                    lhs=_from_db(row.lhs),
                    bound=_from_db(row.bound),
                    satisfied=row.satisfied,
                    iters=row.iters,
                    error=row.error,
                )
                for row in rows
            ]
        finally:
            session.close()

    def list_runs(self, instance_name: Optional[str] = None) -> List[Dict[str, Any]]:
        session = self.get_session()
        try:
            query = session.query(SweepRun)
            if instance_name is not None:
                query = query.filter(SweepRun.instance_name == instance_name)
            return [
                {
                    'id': run.id,
                    'instance_name': run.instance_name,
                    'seed': run.seed,
                    'models': run.models.split(",") if run.models else [],
                    'status': run.status,
                    'n_records': run.n_records,
                    'n_violations': run.n_violations,
                    'started_at': run.started_at,
                    'completed_at': run.completed_at,
                }
                for run in query.order_by(SweepRun.id).all()
            ]
        finally:
            session.close()

    def get_sweep_stats(self) -> Dict[str, Any]:
        """Get row and violation counts per model over all stored sweeps"""
        session = self.get_session()
        try:
            stats: Dict[str, Any] = {'runs': session.query(SweepRun).count(), 'models': {}}
            grouped = session.query(
                SweepRecordRow.model,
                SweepRecordRow.satisfied,
                func.count(SweepRecordRow.id),
            ).group_by(SweepRecordRow.model, SweepRecordRow.satisfied).all()
            for model, satisfied, count in grouped:
                entry = stats['models'].setdefault(model, {'total': 0, 'satisfied': 0, 'violated': 0})
                entry['total'] += count
                entry['satisfied' if satisfied else 'violated'] += count
            return stats
        finally:
            session.close()
