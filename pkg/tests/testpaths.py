import os

FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
