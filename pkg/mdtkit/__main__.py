from mdtkit.cli import run

run()
