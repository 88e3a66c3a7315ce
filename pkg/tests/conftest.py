# keeps this directory importable (shared helpers live in _util.py)
