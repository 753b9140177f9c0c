from src.cli import run

run()
