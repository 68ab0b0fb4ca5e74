"""Root conftest for pytest configuration"""

from dotenv import load_dotenv

# Load environment variables from .env if present.
load_dotenv()
