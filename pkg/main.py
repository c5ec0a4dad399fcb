from dotenv import load_dotenv
import logging
import sys

load_dotenv()

from app.cli import run
from app.env import SPECGAP_LOG_LEVEL

if __name__ == "__main__":
    logging.basicConfig(
        level=SPECGAP_LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    sys.exit(run(sys.argv[1:]))
