from sqlalchemy import Column, Integer, String, Float, ForeignKey, DateTime, Text, Boolean
from sqlalchemy.orm import declarative_base, relationship
from datetime import datetime

Base = declarative_base()


class SweepRun(Base):
    __tablename__ = "sweep_runs"

    id = Column(Integer, primary_key=True, index=True)
    sweep_file = Column(String(500), nullable=False)
    cells = Column(Integer, nullable=False, default=0)
    errors = Column(Integer, nullable=False, default=0)
    wall_clock = Column(Float)  # Seconds for the whole sweep
    created_at = Column(DateTime, default=datetime.utcnow)

    rows = relationship("SweepRow", back_populates="run", cascade="all, delete-orphan")


class SweepRow(Base):
    __tablename__ = "sweep_rows"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("sweep_runs.id", ondelete="CASCADE"), nullable=False)
    cell = Column(Integer, nullable=False)  # Position in the deterministic cell order
    scenario = Column(String(200), nullable=False)
    algorithm = Column(String(10), nullable=False)
    seed = Column(Integer, nullable=False)
    rounds = Column(Integer)
    n = Column(Integer)
    f = Column(Integer)
    faulty = Column(String(200))
    final_spread = Column(Float)
    consensus_value = Column(Float)
    interval_lo = Column(Float)
    interval_hi = Column(Float)
    interval_exact = Column(Boolean)
    member = Column(Boolean)
    distance = Column(Float)
    beta = Column(Float)
    gamma = Column(Integer)
    feasible = Column(Boolean)
    audit_passed = Column(Integer, default=0)
    audit_failed = Column(Integer, default=0)
    error = Column(Text)
    wall_clock = Column(Float)
    created_at = Column(DateTime, default=datetime.utcnow)

    run = relationship("SweepRun", back_populates="rows")
