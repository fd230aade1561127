from sqlmodel import SQLModel, create_engine

from core.config import DATABASE_URL

engine = create_engine(DATABASE_URL)


def create_db_and_tables(bind=None) -> None:
    SQLModel.metadata.create_all(bind or engine)
