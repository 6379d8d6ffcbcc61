import logging
import sys

import sqlalchemy as sa

import database
from models import Base

# Configure logging
logger = logging.getLogger(__name__)


def run_migrations():
    """Create any results table missing from an existing database"""
    inspector = sa.inspect(database.engine)
    for name, table in Base.metadata.tables.items():
        if not inspector.has_table(name):
            logger.info(f"Creating '{name}' table...")
            table.create(database.engine)
            logger.info(f"'{name}' table created successfully")


# Main initialization function
def initialize_database(url=None):
    """Bind the results database and make sure its tables exist"""
    try:
        if url is not None:
            database.configure_database(url)
        run_migrations()
        logger.info("Database initialized successfully!")
    except Exception as e:
        logger.error(f"Error initializing database: {str(e)}")
        raise


if __name__ == "__main__":
    from utils import setup_logging

    setup_logging()
    initialize_database(sys.argv[1] if len(sys.argv) > 1 else None)
