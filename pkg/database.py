from contextlib import contextmanager
from typing import Optional

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker, scoped_session
import logging

from utils import get_setting

# Configure logging
logger = logging.getLogger(__name__)

# Create database engine from FTOPT_DATABASE_URL (sqlite file by default)
engine = create_engine(get_setting("FTOPT_DATABASE_URL"))

# Create sessionmaker
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

# Create scoped session for sweep workers sharing a process
ScopedSession = scoped_session(SessionLocal)


def configure_database(url: Optional[str] = None) -> None:
    """Rebind the engine and session factories, e.g. for `sweep --db URL`."""
    global engine
    url = url or get_setting("FTOPT_DATABASE_URL")
    engine.dispose()
    engine = create_engine(url)
    SessionLocal.configure(bind=engine)
    ScopedSession.remove()
    logger.info(f"Database bound to {engine.url.render_as_string(hide_password=True)}")


@contextmanager
def get_db_context():
    """
    Session on the results database, closed on exit.
    Usage:
        with get_db_context() as db:
            runs = db.query(SweepRun).all()
    """
    db = ScopedSession()
    try:
        yield db
    finally:
        db.close()
        ScopedSession.remove()
